//! JSON endpoints over the registry.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use castcost::report::{
    bench_report, compute_report, sweep_report, to_json_bytes, whatif_report, BenchRequest,
    ComputeRequest, SweepRequest, WhatIfRequest,
};
use castcost::{model_levers, DocDiagnostic};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use thiserror::Error;
use tower_http::cors::{Any, CorsLayer};

use crate::registry::{check_model, ModelEntry, ModelRegistry, RejectedModel};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("malformed request body: {0}")]
    BadBody(String),
    #[error(transparent)]
    Rejected(#[from] RejectedModel),
    #[error(transparent)]
    Engine(#[from] castcost::Error),
}

/// Stable machine-readable name of an engine failure.
fn engine_code(e: &castcost::Error) -> &'static str {
    use castcost::Error::*;
    match e.root_cause() {
        UnresolvedParameter { .. } => "unresolved_parameter",
        CyclicParameter { .. } => "cyclic_parameter",
        Eval(_) => "evaluation_error",
        YieldOutOfRange { .. } | PartsPerCycleOutOfRange { .. } | ScrapRateOutOfRange { .. } => {
            "out_of_range"
        }
        NegativeCrewSize { .. } | NegativeCost { .. } => "negative_value",
        NonPositiveTarget(_) | NonPositiveBudget(_) | InvalidSeries(_) => "invalid_indicator_input",
        UnknownId { .. } => "unknown_id",
        AssemblyCycle(_) => "assembly_cycle",
        UnknownOverride(_) | NonFiniteOverride { .. } => "invalid_override",
        NoRateTables => "no_rate_tables",
        ShapeMismatch { .. } => "shape_mismatch",
        At { .. } => unreachable!("root_cause strips locations"),
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownModel(_) => StatusCode::NOT_FOUND,
            ApiError::BadBody(_) => StatusCode::BAD_REQUEST,
            ApiError::Rejected(_) | ApiError::Engine(_) => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn body(&self) -> Value {
        let mut body = json!({ "message": self.to_string() });
        let code = match self {
            ApiError::UnknownModel(_) => "unknown_model",
            ApiError::BadBody(_) => "bad_request",
            ApiError::Rejected(RejectedModel::Syntax(s)) => {
                body["location"] = json!({ "line": s.line, "column": s.column });
                "syntax_error"
            }
            ApiError::Rejected(RejectedModel::Invalid(diags)) => {
                if let Some(first) = diags.iter().find(|d| d.is_error()) {
                    body["location"] = json!({ "line": first.line, "column": first.column });
                }
                body["diagnostics"] = json!(diags);
                "invalid_model"
            }
            ApiError::Engine(e) => {
                if let castcost::Error::At { path, .. } = e {
                    body["location"] = json!({ "path": path });
                }
                engine_code(e)
            }
        };
        body["code"] = json!(code);
        body
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status(), to_json_bytes(&self.body()))
    }
}

fn json_response(status: StatusCode, bytes: Vec<u8>) -> Response {
    (
        status,
        [(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        )],
        bytes,
    )
        .into_response()
}

fn ok_json<T: serde::Serialize>(value: &T) -> Response {
    json_response(StatusCode::OK, to_json_bytes(value))
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadBody(e.to_string()))
}

type Registry = Arc<ModelRegistry>;

fn entry(reg: &ModelRegistry, id: &str) -> Result<Arc<ModelEntry>, ApiError> {
    reg.get(id)
        .ok_or_else(|| ApiError::UnknownModel(id.to_string()))
}

/// Runs engine work off the async workers, on one model snapshot.
async fn with_model<T, F>(
    reg: Registry,
    id: String,
    body: Bytes,
    f: F,
) -> Result<Response, ApiError>
where
    T: DeserializeOwned + Send + 'static,
    F: FnOnce(&castcost::CostModel, T) -> Result<Response, ApiError> + Send + 'static,
{
    let snapshot = entry(&reg, &id)?;
    let req: T = parse_body(&body)?;
    tokio::task::spawn_blocking(move || f(&snapshot.doc.model, req))
        .await
        .expect("engine task does not panic")
}

async fn health() -> Response {
    ok_json(&json!({ "status": "ok" }))
}

async fn list_models(State(reg): State<Registry>) -> Response {
    ok_json(&reg.list())
}

async fn put_model(
    State(reg): State<Registry>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let text =
        std::str::from_utf8(&body).map_err(|e| ApiError::BadBody(format!("model text: {e}")))?;
    let doc = check_model(text)?;
    let diagnostics: Vec<DocDiagnostic> = doc.diagnostics();
    let version = reg.insert(&id, doc);
    Ok(ok_json(
        &json!({ "id": id, "version": version, "diagnostics": diagnostics }),
    ))
}

async fn levers(State(reg): State<Registry>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(ok_json(&model_levers(&entry(&reg, &id)?.doc.model)))
}

async fn compute(
    State(reg): State<Registry>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    with_model(reg, id, body, |model, req: ComputeRequest| {
        Ok(json_response(
            StatusCode::OK,
            compute_report(model, &req)?.to_json(),
        ))
    })
    .await
}

async fn whatif(
    State(reg): State<Registry>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    with_model(reg, id, body, |model, req: WhatIfRequest| {
        Ok(ok_json(&whatif_report(model, &req)?))
    })
    .await
}

async fn sweep(
    State(reg): State<Registry>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    with_model(reg, id, body, |model, req: SweepRequest| {
        Ok(ok_json(&sweep_report(model, &req)?))
    })
    .await
}

async fn bench(
    State(reg): State<Registry>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    with_model(reg, id, body, |model, req: BenchRequest| {
        Ok(ok_json(&bench_report(model, &req)?))
    })
    .await
}

/// The API routes. With `cors_origin`, browsers from that origin may
/// call every endpoint.
pub fn router(registry: Registry, cors_origin: Option<HeaderValue>) -> Router {
    let app = Router::new()
        .route("/api/health", get(health))
        .route("/api/models", get(list_models))
        .route("/api/models/{id}", axum::routing::put(put_model))
        .route("/api/models/{id}/levers", get(levers))
        .route("/api/models/{id}/compute", post(compute))
        .route("/api/models/{id}/whatif", post(whatif))
        .route("/api/models/{id}/sweep", post(sweep))
        .route("/api/models/{id}/bench", post(bench))
        .with_state(registry);
    match cors_origin {
        Some(origin) => app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods(Any)
                .allow_headers(Any),
        ),
        None => app,
    }
}
