//! HTTP control plane for live scene editing and progressive frame
//! retrieval.
//!
//! One render thread owns the session; HTTP handlers talk to it through a
//! command queue. Edits are applied between frames in arrival order and
//! frame requests are served one at a time.

pub mod edit;
pub mod http;
pub mod worker;

use std::net::SocketAddr;

use gsgi_core::session::Session;

pub use edit::{apply, Edit, EditError};
pub use http::{router, FRAME_INDEX_HEADER};
pub use worker::{Format, FrameBytes, Layer, Quality, Worker};

/// Serves `session` on `addr` until the process exits.
pub async fn serve(session: Session, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Worker::spawn(session))).await
}

/// Blocking form of [`serve`] that runs its own runtime.
pub fn serve_blocking(session: Session, addr: SocketAddr) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(session, addr))
}
