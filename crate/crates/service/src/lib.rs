//! JSON-over-HTTP API hosting interactive active-learning sessions.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/datasets` | `{name, csv, labels_csv?}` |
//! | POST | `/sessions` | `{dataset, session_config?, model_config?, wait?}` |
//! | GET | `/sessions/{id}` | |
//! | GET | `/sessions/{id}/candidates` | |
//! | POST | `/sessions/{id}/labels` | `{labels: {row_id: "normal" \| "anomaly"}}` |
//! | GET | `/sessions/{id}/metrics` | `?offset&limit` for the ranking page |
//! | GET | `/sessions/{id}/ranking` | `?offset&limit` |
//! | GET | `/sessions/{id}/report` | |
//! | GET | `/sessions/{id}/journal` | |
//! | GET | `/healthz` | |
//!
//! Training runs on the blocking pool; while it does, the session reports
//! phase `training` or `retraining` and clients poll. Errors are
//! `{code, message, detail}`.

mod error;
mod handlers;
mod state;
pub mod views;

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::response::Html;
use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;

pub use error::{ApiError, ErrorBody};
pub use state::AppState;

/// Upload limit when none is configured: 64 MiB.
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Built UI assets served at `/`; a placeholder page otherwise.
    pub static_dir: Option<PathBuf>,
    pub max_upload_bytes: usize,
    /// Session journals are written here when set.
    pub journal_dir: Option<PathBuf>,
    /// Attention-weighted active features listed per candidate.
    pub top_features: usize,
    /// Nearest labeled neighbours listed per candidate and label.
    pub neighbours: usize,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            static_dir: None,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            journal_dir: None,
            top_features: 10,
            neighbours: 3,
        }
    }
}

const PLACEHOLDER: &str = include_str!("../static/index.html");

pub fn router(options: ServiceOptions) -> Router {
    let limit = options.max_upload_bytes;
    let static_dir = options.static_dir.clone();
    let state = Arc::new(AppState::new(options));
    let api = Router::new()
        .route("/healthz", get(handlers::healthz))
        .route("/datasets", post(handlers::create_dataset))
        .route("/sessions", post(handlers::create_session))
        .route("/sessions/{id}", get(handlers::get_session))
        .route("/sessions/{id}/candidates", get(handlers::get_candidates))
        .route("/sessions/{id}/labels", post(handlers::submit_labels))
        .route("/sessions/{id}/metrics", get(handlers::get_metrics))
        .route("/sessions/{id}/ranking", get(handlers::get_ranking))
        .route("/sessions/{id}/report", get(handlers::get_report))
        .route("/sessions/{id}/journal", get(handlers::get_journal))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, options: ServiceOptions) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(options)).await
}
