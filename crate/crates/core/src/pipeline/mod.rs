//! Per-frame orchestration.
//!
//! A frame runs as a fixed sequence of phases: G-buffer, Hi-Z, light grid,
//! direct diffuse, probe and cache update, indirect diffuse, glossy, then
//! composition and tone mapping. Final radiance is the sum of four layers
//! (emission, direct diffuse, indirect diffuse, glossy), each weighted by
//! G-buffer opacity; the environment shows through the residual
//! transparency as part of the emission layer.
//!
//! [`FrameState`] carries everything one frame hands to the next.

pub mod brdf;
pub mod glossy;
mod tonemap;


pub use brdf::SplitSumLut;
pub use glossy::{
    coarse_reflection, sample_reflection, split_sum_shade, trace_glossy, upsample, GlossyParams, GlossyTrace,
    HalfResReflection, LOBE_RETRIES,
};
pub use tonemap::{tonemap, tonemap_image, to_ldr, GAMMA};

use crate::camera::CameraModel;
use crate::direct_light::{
    direct_incident_buffer, filter_direct, temporal_blend, DirectContext, GridParams, History, LightGrid,
};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Rgb;
use crate::radiance_cache::{
    apply_updates, interpolate_incident, place_probes, resolve_radiance, update_probes, HashGrid, HashGridParams,
    PrevFilm, ProbeParams, ProbeSample, ProbeSet, ResolveContext,
};
use crate::raster::{render_gbuffer, GBuffer, RasterOptions};
use crate::scene::Scene;
use crate::tracer::{build_accel, trace_compound, HiZ, ScreenContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Passes {
    pub direct: bool,
    pub indirect: bool,
    pub glossy: bool,
    pub emission: bool,
}

impl Default for Passes {
    fn default() -> Self {
        Passes { direct: true, indirect: true, glossy: true, emission: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub seed: u64,
    pub passes: Passes,
    /// Resolve probe and reflection hits from the previous film when possible.
    pub film_reuse: bool,
    /// Bias scale for stochastic tracing, in `(0, 1]`.
    pub bias_scale: f64,
    pub raster: RasterOptions,
    pub grid: GridParams,
    pub probes: ProbeParams,
    pub cache: HashGridParams,
    pub glossy: GlossyParams,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            seed: 0,
            passes: Passes::default(),
            film_reuse: true,
            bias_scale: 1.0,
            raster: RasterOptions::default(),
            grid: GridParams::default(),
            probes: ProbeParams::default(),
            cache: HashGridParams::default(),
            glossy: GlossyParams::default(),
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bias_scale > 0.0 && self.bias_scale <= 1.0) {
            return Err(Error::invalid("config", format!("bias scale {} outside (0, 1]", self.bias_scale)));
        }
        if self.probes.spacing == 0 || self.probes.rays_per_probe == 0 || self.probes.max_samples == 0 {
            return Err(Error::invalid("config", "probe spacing, rays and sample cap must be positive"));
        }
        let g = &self.glossy;
        if !(0.0 <= g.r_detail && g.r_detail < g.r_coarse && g.r_coarse <= 1.0) {
            return Err(Error::invalid("config", "glossy thresholds must satisfy 0 <= r_detail < r_coarse <= 1"));
        }
        if !(g.temporal_alpha > 0.0 && g.temporal_alpha <= 1.0) {
            return Err(Error::invalid("config", "glossy temporal alpha outside (0, 1]"));
        }
        if !self.cache.capacity.is_power_of_two() {
            return Err(Error::invalid("config", "cache capacity must be a power of two"));
        }
        Ok(())
    }
}

/// State carried between frames. Histories, probes and film are only read
/// back when the resolution matches.
#[derive(Debug, Clone)]
pub struct FrameState {
    pub frame: u64,
    pub seed: u64,
    pub camera: Option<CameraModel>,
    pub film: Option<PrevFilm>,
    pub direct_history: Option<History>,
    pub glossy_history: Option<History>,
    pub probes: Option<ProbeSet>,
    pub cache: HashGrid,
    pub hiz: Option<HiZ>,
}

impl FrameState {
    pub fn new(config: &RenderConfig) -> Self {
        FrameState {
            frame: 0,
            seed: config.seed,
            camera: None,
            film: None,
            direct_history: None,
            glossy_history: None,
            probes: None,
            cache: HashGrid::new(config.cache),
            hiz: None,
        }
    }

    /// Drops screen-space history; the hash grid survives.
    pub fn invalidate_history(&mut self) {
        self.camera = None;
        self.film = None;
        self.direct_history = None;
        self.glossy_history = None;
        self.probes = None;
        self.hiz = None;
    }

    /// Drops every cached lighting result, e.g. after a scene edit.
    pub fn invalidate_lighting(&mut self) {
        self.invalidate_history();
        self.cache.clear();
    }
}

/// Opacity-weighted lighting components of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Layers {
    /// Surface emission plus the environment seen through `1 - opacity`.
    pub emission: Image<Rgb>,
    pub direct: Image<Rgb>,
    pub indirect: Image<Rgb>,
    pub glossy: Image<Rgb>,
}

impl Layers {
    /// Composite in the same order the renderer sums.
    pub fn sum(&self) -> Image<Rgb> {
        let data = (0..self.emission.len())
            .map(|i| self.emission.data[i] + self.direct.data[i] + self.indirect.data[i] + self.glossy.data[i])
            .collect();
        Image::from_vec(self.emission.width, self.emission.height, data)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Image<Rgb>)> {
        [
            ("emission", &self.emission),
            ("direct", &self.direct),
            ("indirect", &self.indirect),
            ("glossy", &self.glossy),
        ]
        .into_iter()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameStats {
    pub valid_probes: usize,
    pub reused_probes: usize,
    pub cache_writes: usize,
    pub cache_evicted: usize,
    pub cache_cells: usize,
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub frame: u64,
    /// Linear radiance.
    pub hdr: Image<Rgb>,
    pub ldr: Image<[u8; 3]>,
    pub layers: Layers,
    pub gbuffer: GBuffer,
    pub stats: FrameStats,
}

fn check_camera(camera: &CameraModel) -> Result<()> {
    if camera.width == 0 || camera.height == 0 {
        return Err(Error::invalid("camera", "zero resolution"));
    }
    let finite = camera.position.iter().chain(camera.forward.iter()).all(|v| v.is_finite());
    if !finite || (camera.forward.norm() - 1.0).abs() > 1e-6 || !camera.focal().is_finite() || camera.focal() <= 0.0 {
        return Err(Error::invalid("camera", "non-finite or degenerate pose"));
    }
    Ok(())
}

fn weighted(g: &GBuffer, f: impl Fn(usize) -> Rgb + Sync + Send) -> Image<Rgb> {
    use rayon::prelude::*;
    let data = (0..g.len()).into_par_iter().map(|i| g.data[i].opacity * f(i)).collect();
    Image::from_vec(g.width, g.height, data)
}

/// Renders one frame and advances `state`.
pub fn render_frame(scene: &Scene, camera: &CameraModel, state: &mut FrameState, config: &RenderConfig) -> Result<FrameOutput> {
    check_camera(camera)?;
    config.validate()?;
    scene.validate()?;
    if state.camera.is_some_and(|c| c.width != camera.width || c.height != camera.height) {
        state.invalidate_history();
    }
    let seed = state.seed;
    let frame = state.frame;
    let passes = config.passes;
    let scale = config.bias_scale;
    let environment = scene.environment();

    let g = render_gbuffer(scene, camera, &config.raster);
    let accel = build_accel(scene);
    let hiz = HiZ::build(&g, camera);
    let screen = ScreenContext { camera, gbuffer: &g, hiz: &hiz };
    let grid = LightGrid::build(&scene.lights, &camera.position, config.grid, seed, frame);
    let direct_ctx = DirectContext { lights: &scene.lights, grid: &grid, environment, accel: &accel, scale };
    let zeros = Image::new(g.width, g.height, Rgb::zeros());

    // Direct diffuse, as filtered E / pi.
    let direct_incident = if passes.direct {
        let raw = direct_incident_buffer(&direct_ctx, &g, seed, frame);
        let (filtered, hist) = filter_direct(&raw, state.direct_history.as_ref(), &g, camera);
        state.direct_history = Some(hist);
        filtered
    } else {
        state.direct_history = None;
        zeros.clone()
    };

    // Probes feed both indirect diffuse and coarse reflections.
    let mut stats = FrameStats::default();
    let probes = if passes.indirect || passes.glossy {
        let mut set = place_probes(&g, config.probes.spacing);
        if let (Some(prev), Some(prev_cam)) = (&state.probes, &state.camera) {
            stats.reused_probes = set.inherit(prev, prev_cam);
        }
        let updates = {
            let resolve = ResolveContext {
                film: state.film.as_ref().filter(|_| config.film_reuse),
                cache: &state.cache,
                direct: direct_ctx,
                camera_position: camera.position,
            };
            // Escaped probe rays carry nothing: the environment is already
            // part of the direct term.
            update_probes(&mut set, &config.probes, seed, frame, |ray, rng| {
                match trace_compound(&screen, &accel, ray, rng, scale) {
                    Some(h) => {
                        let r = resolve_radiance(&resolve, &h.hit, &ray.direction, rng);
                        ProbeSample { radiance: r.radiance, update: r.update }
                    }
                    None => ProbeSample { radiance: Rgb::zeros(), update: None },
                }
            })
        };
        stats.cache_writes += apply_updates(&mut state.cache, &updates, frame);
        stats.valid_probes = set.valid_count();
        Some(set)
    } else {
        None
    };
    let indirect_incident = match (&probes, passes.indirect) {
        (Some(set), true) => interpolate_incident(&g, set),
        _ => zeros.clone(),
    };

    // Glossy reflections.
    let glossy = if passes.glossy {
        let half = {
            let resolve = ResolveContext {
                film: state.film.as_ref().filter(|_| config.film_reuse),
                cache: &state.cache,
                direct: direct_ctx,
                camera_position: camera.position,
            };
            trace_glossy(&GlossyTrace {
                screen,
                accel: &accel,
                resolve,
                environment,
                scale,
                cutoff: config.glossy.r_coarse,
                seed,
                frame,
            })
        };
        stats.cache_writes += apply_updates(&mut state.cache, &half.updates, frame);
        let detailed = upsample(&half, &g, config.glossy.r_coarse);
        let probe_diffuse = match (&probes, passes.indirect) {
            (_, true) => indirect_incident.clone(),
            (Some(set), false) => interpolate_incident(&g, set),
            (None, false) => zeros.clone(),
        };
        let coarse = coarse_reflection(
            &g,
            camera,
            probes.as_ref(),
            &probe_diffuse,
            &direct_incident,
            environment,
            &config.glossy,
        );
        let shaded = split_sum_shade(&g, camera, &detailed, &coarse, &config.glossy, SplitSumLut::shared());
        let (filtered, hist) =
            temporal_blend(&shaded, &g, camera, state.glossy_history.as_ref(), config.glossy.temporal_alpha);
        state.glossy_history = Some(hist);
        filtered
    } else {
        state.glossy_history = None;
        zeros.clone()
    };

    // Composition.
    let emission = if passes.emission {
        Image::from_vec(
            g.width,
            g.height,
            (0..g.len())
                .map(|i| {
                    let p = &g.data[i];
                    let env = match environment {
                        Some(e) if p.opacity < 1.0 => {
                            e.radiance(&camera.direction((i % g.width) as f64 + 0.5, (i / g.width) as f64 + 0.5))
                        }
                        _ => Rgb::zeros(),
                    };
                    p.emission * p.opacity + env * (1.0 - p.opacity)
                })
                .collect(),
        )
    } else {
        zeros.clone()
    };
    let layers = Layers {
        emission,
        direct: weighted(&g, |i| g.data[i].albedo.component_mul(&direct_incident.data[i])),
        indirect: weighted(&g, |i| g.data[i].albedo.component_mul(&indirect_incident.data[i])),
        glossy: weighted(&g, |i| glossy.data[i]),
    };
    let hdr = layers.sum();
    let ldr = to_ldr(&hdr);

    // Per-surface outgoing radiance for next frame's film reuse.
    let film = Image::from_vec(
        g.width,
        g.height,
        (0..g.len())
            .map(|i| {
                let p = &g.data[i];
                if !p.is_covered() {
                    return Rgb::zeros();
                }
                let diffuse = p.albedo.component_mul(&(direct_incident.data[i] + indirect_incident.data[i]));
                let e = if passes.emission { p.emission } else { Rgb::zeros() };
                e + diffuse + glossy.data[i]
            })
            .collect(),
    );
    state.film = Some(PrevFilm::new(film, &g, camera));
    state.probes = probes;
    state.camera = Some(*camera);
    state.hiz = Some(hiz);
    stats.cache_evicted = state.cache.maintain(frame);
    stats.cache_cells = state.cache.len();
    state.frame += 1;

    Ok(FrameOutput { frame, hdr, ldr, layers, gbuffer: g, stats })
}

/// Renders `frames` frames from a fixed camera and returns the last.
pub fn render_frames(
    scene: &Scene,
    camera: &CameraModel,
    state: &mut FrameState,
    config: &RenderConfig,
    frames: usize,
) -> Result<FrameOutput> {
    if frames == 0 {
        return Err(Error::invalid("frame count", "must be at least 1"));
    }
    let mut out = render_frame(scene, camera, state, config)?;
    for _ in 1..frames {
        out = render_frame(scene, camera, state, config)?;
    }
    Ok(out)
}

/// The four lighting layers of the next frame.
pub fn decompose_lighting(
    scene: &Scene,
    camera: &CameraModel,
    state: &mut FrameState,
    config: &RenderConfig,
) -> Result<Layers> {
    Ok(render_frame(scene, camera, state, config)?.layers)
}
