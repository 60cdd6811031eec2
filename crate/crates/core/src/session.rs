//! A loaded scene description together with its render state.
//!
//! The command-line renderer and the HTTP service both drive frames through
//! [`Session`], so equal descriptions and seeds give equal frames.

use std::path::Path;

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::scene::{load_scene, AssetCache, SceneDescription};
use crate::math::Rgb;
use crate::pipeline::{render_frame, to_ldr, FrameOutput, FrameState, RenderConfig};
use crate::scene::Scene;

/// What an edit touched; decides which histories survive it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Change {
    /// Light radiance or placement. The direct history is dropped so the
    /// next frame shows the new direct lighting; indirect caches update
    /// progressively.
    Lighting,
    /// Surface materials. Screen histories survive; the cache updates
    /// progressively.
    Material,
    /// Object placement. Reprojection rejects disoccluded history.
    Geometry,
    /// Camera pose. Reprojection handles it; a resolution change drops the
    /// screen histories inside the renderer.
    Camera,
    /// Render settings such as the seed or passes. Everything restarts.
    Settings,
}

#[derive(Debug)]
pub struct Session {
    desc: SceneDescription,
    assets: AssetCache,
    scene: Scene,
    camera: CameraModel,
    config: RenderConfig,
    state: FrameState,
    last: Option<FrameOutput>,
}

impl Session {
    pub fn new(desc: SceneDescription) -> Result<Self> {
        let mut assets = AssetCache::new();
        let scene = desc.build(&mut assets)?;
        let camera = desc.camera()?;
        let config = desc.render_config();
        config.validate()?;
        let state = FrameState::new(&config);
        Ok(Session { desc, assets, scene, camera, config, state, last: None })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(load_scene(path)?)
    }

    pub fn description(&self) -> &SceneDescription {
        &self.desc
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn config(&self) -> &RenderConfig {
        &self.config
    }

    /// Index the next rendered frame will carry.
    pub fn next_frame(&self) -> u64 {
        self.state.frame
    }

    /// Most recently rendered frame.
    pub fn last_frame(&self) -> Option<&FrameOutput> {
        self.last.as_ref()
    }

    /// Replaces the description. On error the session is unchanged.
    pub fn update(&mut self, desc: SceneDescription, change: Change) -> Result<()> {
        desc.validate()?;
        let scene = desc.build(&mut self.assets)?;
        let camera = desc.camera()?;
        let config = desc.render_config();
        config.validate()?;
        self.desc = desc;
        self.scene = scene;
        self.camera = camera;
        self.config = config;
        match change {
            Change::Lighting => self.state.direct_history = None,
            Change::Material | Change::Geometry | Change::Camera => {}
            Change::Settings => {
                let frame = self.state.frame;
                self.state = FrameState::new(&self.config);
                self.state.frame = frame;
            }
        }
        Ok(())
    }

    /// Renders the next frame.
    pub fn render(&mut self) -> Result<&FrameOutput> {
        let out = render_frame(&self.scene, &self.camera, &mut self.state, &self.config)?;
        Ok(self.last.insert(out))
    }

    /// Renders `frames` frames and returns the last one with its composite
    /// replaced by the mean composite over all of them.
    pub fn render_accumulated(&mut self, frames: usize) -> Result<&FrameOutput> {
        if frames == 0 {
            return Err(Error::invalid("frame count", "must be at least 1"));
        }
        let mut sum: Option<Image<Rgb>> = None;
        for _ in 0..frames {
            let hdr = &self.render()?.hdr;
            match &mut sum {
                None => sum = Some(hdr.clone()),
                Some(s) => s.data.iter_mut().zip(&hdr.data).for_each(|(a, b)| *a += b),
            }
        }
        let mut mean = sum.expect("at least one frame");
        mean.data.iter_mut().for_each(|c| *c /= frames as f64);
        let last = self.last.as_mut().expect("rendered");
        last.ldr = to_ldr(&mean);
        last.hdr = mean;
        Ok(last)
    }
}
