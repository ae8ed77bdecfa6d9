//! HTTP service for interactive search sessions over annotated albums.
//!
//! Routes, all exchanging `{"v": 1, ...}` bodies:
//!
//! ```text
//! POST   /albums                                 load <album_root>/<path>
//! GET    /albums/{album}/images
//! GET    /albums/{album}/images/{image}/annotation
//! POST   /albums/{album}/tags
//! POST   /sessions
//! POST   /sessions/{session}/search
//! POST   /sessions/{session}/saved
//! DELETE /sessions/{session}/saved/{image}
//! POST   /sessions/{session}/export
//! GET    /static/{album}/{image}.jpg
//! ```

pub mod api;
pub mod config;
mod error;
pub mod events;
mod routes;
mod state;

use std::sync::Arc;

pub use config::{ConfigError, ServiceConfig, SourceConfig, SourceKind, CONFIG_ENV};
pub use error::ApiError;
pub use routes::router;
pub use state::{valid_id, AlbumEntry, AppState, Session};

/// Builds the state and router for `config`, preloading every album under
/// the album root.
pub fn app(config: ServiceConfig) -> (Arc<AppState>, axum::Router) {
    let state = Arc::new(AppState::new(config));
    let loaded = state.load_all();
    tracing::info!(albums = ?loaded, "albums preloaded");
    let router = router(Arc::clone(&state));
    (state, router)
}

/// Serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let addr = config.addr();
    let (_, router) = app(config);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router).await
}
