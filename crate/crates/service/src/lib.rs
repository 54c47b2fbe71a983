//! HTTP service over the castcost engine.
//!
//! Models live in a [`ModelRegistry`]; every request works on one
//! immutable snapshot, and `PUT /api/models/{id}` swaps in a new one.

pub mod api;
pub mod registry;

use std::sync::Arc;

use axum::http::HeaderValue;
use tokio::net::TcpListener;

pub use api::{router, ApiError};
pub use registry::{
    check_model, load_models, LoadError, ModelEntry, ModelRegistry, ModelSummary, RejectedModel,
};

/// Address used unless the caller asks for a wider one.
pub const DEFAULT_HOST: &str = "127.0.0.1";

/// Header value for a `--cors` origin such as `http://localhost:5173`.
pub fn cors_origin(origin: &str) -> Result<HeaderValue, axum::http::header::InvalidHeaderValue> {
    HeaderValue::from_str(origin)
}

/// Serves the API on `listener` until the task is dropped.
pub async fn serve(
    listener: TcpListener,
    registry: Arc<ModelRegistry>,
    cors_origin: Option<HeaderValue>,
) -> std::io::Result<()> {
    axum::serve(listener, router(registry, cors_origin)).await
}
