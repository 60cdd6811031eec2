//! The render thread. It owns the [`Session`] and executes commands in
//! arrival order, so edits land between frames and frames never see a
//! half-applied edit.

use std::sync::mpsc;
use std::thread;

use gsgi_core::image::Image;
use gsgi_core::io::{encode_pfm, encode_ppm, SceneDescription};
use gsgi_core::pipeline::to_ldr;
use gsgi_core::session::Session;
use gsgi_core::Rgb;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::oneshot;

use crate::edit::{apply, Edit, EditError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    /// The next single frame.
    #[default]
    Preview,
    /// The mean of `render.converged_frames` consecutive frames.
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Composite,
    Emission,
    Direct,
    Indirect,
    Glossy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// 8-bit tone-mapped pixmap.
    #[default]
    Ppm,
    /// Linear float map.
    Pfm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBytes {
    pub index: u64,
    pub bytes: Vec<u8>,
}

enum Command {
    Scene(oneshot::Sender<SceneDescription>),
    Edit(Edit, oneshot::Sender<Result<Value, EditError>>),
    Frame(Quality, oneshot::Sender<Result<FrameBytes, String>>),
    Layer(Layer, Format, oneshot::Sender<Option<FrameBytes>>),
}

/// Cloneable handle to the render thread. The thread exits once every
/// handle is dropped.
#[derive(Debug, Clone)]
pub struct Worker {
    tx: mpsc::Sender<Command>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("render thread stopped")]
pub struct Stopped;

fn encode(img: &Image<Rgb>, format: Format) -> Vec<u8> {
    match format {
        Format::Ppm => encode_ppm(&to_ldr(img)),
        Format::Pfm => encode_pfm(img),
    }
}

fn run(mut session: Session, rx: mpsc::Receiver<Command>) {
    while let Ok(cmd) = rx.recv() {
        match cmd {
            Command::Scene(reply) => {
                let _ = reply.send(session.description().clone());
            }
            Command::Edit(edit, reply) => {
                let result = apply(session.description(), &edit).and_then(|(desc, value)| {
                    session
                        .update(desc, edit.change())
                        .map(|()| value)
                        .map_err(|e| EditError::Invalid { field: String::new(), message: e.to_string() })
                });
                let _ = reply.send(result);
            }
            Command::Frame(quality, reply) => {
                let result = match quality {
                    Quality::Preview => session.render(),
                    Quality::Converged => {
                        let n = session.description().render.converged_frames;
                        session.render_accumulated(n)
                    }
                };
                let out = result
                    .map(|f| FrameBytes { index: f.frame, bytes: encode_ppm(&f.ldr) })
                    .map_err(|e| e.to_string());
                let _ = reply.send(out);
            }
            Command::Layer(layer, format, reply) => {
                let out = session.last_frame().map(|f| {
                    let img = match layer {
                        Layer::Composite => &f.hdr,
                        Layer::Emission => &f.layers.emission,
                        Layer::Direct => &f.layers.direct,
                        Layer::Indirect => &f.layers.indirect,
                        Layer::Glossy => &f.layers.glossy,
                    };
                    FrameBytes { index: f.frame, bytes: encode(img, format) }
                });
                let _ = reply.send(out);
            }
        }
    }
}

impl Worker {
    pub fn spawn(session: Session) -> Worker {
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("render".into())
            .spawn(move || run(session, rx))
            .expect("spawn render thread");
        Worker { tx }
    }

    async fn call<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> Result<T, Stopped> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(make(tx)).map_err(|_| Stopped)?;
        rx.await.map_err(|_| Stopped)
    }

    pub async fn scene(&self) -> Result<SceneDescription, Stopped> {
        self.call(Command::Scene).await
    }

    pub async fn edit(&self, edit: Edit) -> Result<Result<Value, EditError>, Stopped> {
        self.call(|tx| Command::Edit(edit, tx)).await
    }

    pub async fn frame(&self, quality: Quality) -> Result<Result<FrameBytes, String>, Stopped> {
        self.call(|tx| Command::Frame(quality, tx)).await
    }

    /// A layer of the most recent frame, or `None` before the first frame.
    pub async fn layer(&self, layer: Layer, format: Format) -> Result<Option<FrameBytes>, Stopped> {
        self.call(|tx| Command::Layer(layer, format, tx)).await
    }
}
