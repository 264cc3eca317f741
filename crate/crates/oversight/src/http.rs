use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::service::{Action, CaseFilter, Service, ServiceError};

pub const ACTOR_HEADER: &str = "x-actor";

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Validation(_) | ServiceError::AnalysisRequired => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Store(_) | ServiceError::Analysis(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

fn actor(headers: &HeaderMap) -> String {
    headers
        .get(ACTOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|s| !s.trim().is_empty())
        .unwrap_or("anonymous")
        .to_string()
}

#[derive(Deserialize)]
struct NewCase {
    input: Vec<f64>,
}

#[derive(Deserialize)]
struct NewDecision {
    action: Action,
    rationale: String,
}

type Shared = State<Arc<Service>>;
type Reply = Result<Response, ServiceError>;

async fn ingest(State(s): Shared, headers: HeaderMap, Json(body): Json<NewCase>) -> Reply {
    let case = s.ingest(body.input, &actor(&headers))?;
    Ok((StatusCode::CREATED, Json(case)).into_response())
}

async fn list(State(s): Shared, Query(filter): Query<CaseFilter>) -> Reply {
    Ok(Json(s.list(&filter)).into_response())
}

async fn fetch(State(s): Shared, Path(id): Path<String>) -> Reply {
    Ok(Json(s.get(&id)?).into_response())
}

async fn analyze(State(s): Shared, Path(id): Path<String>, headers: HeaderMap) -> Reply {
    Ok(Json(s.analyze(&id, &actor(&headers)).await?).into_response())
}

async fn decide(
    State(s): Shared,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(body): Json<NewDecision>,
) -> Reply {
    Ok(Json(s.decide(&id, body.action, body.rationale, &actor(&headers))?).into_response())
}

async fn audit(State(s): Shared) -> Reply {
    Ok(Json(json!({ "entries": s.audit() })).into_response())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/cases", post(ingest).get(list))
        .route("/cases/{id}", get(fetch))
        .route("/cases/{id}/analyze", post(analyze))
        .route("/cases/{id}/decision", post(decide))
        .route("/audit", get(audit))
        .with_state(service)
}

pub async fn serve(service: Arc<Service>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service)).await
}
