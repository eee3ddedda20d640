//! HTTP+JSON front end of the session store.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::store::{ErrorKind, ServiceError, SessionStore, Submission};

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Invalid => StatusCode::BAD_REQUEST,
            ErrorKind::Rejected => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            code: self.code().to_string(),
            message: self.message,
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    participant_id: String,
    #[serde(default)]
    seed: Option<u64>,
}

type AppState = Arc<SessionStore>;

async fn create(State(store): State<AppState>, body: Result<Json<CreateRequest>, axum::extract::rejection::JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return bad_body(e),
    };
    match store.create(&req.participant_id, req.seed) {
        Ok(created) => (StatusCode::CREATED, Json(created)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn next(State(store): State<AppState>, Path(id): Path<String>) -> Response {
    match store.next(&id) {
        Ok(item) => Json(item).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn submit(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Submission>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(sub) = match body {
        Ok(b) => b,
        Err(e) => return bad_body(e),
    };
    match store.submit(&id, &sub) {
        Ok(ack) => Json(ack).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn export(State(store): State<AppState>, Path(id): Path<String>) -> Response {
    match store.export_jsonl(&id) {
        Ok(body) => ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn healthz(State(store): State<AppState>) -> Response {
    Json(serde_json::json!({ "status": "ok", "sessions": store.len() })).into_response()
}

fn bad_body(e: axum::extract::rejection::JsonRejection) -> Response {
    ServiceError {
        kind: ErrorKind::Invalid,
        message: e.body_text(),
    }
    .into_response()
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/:id/next", get(next))
        .route("/sessions/:id/submit", post(submit))
        .route("/sessions/:id/export", get(export))
        .route("/healthz", get(healthz))
        .with_state(store)
}

/// Serves until Ctrl-C, sweeping idle sessions every `sweep` interval.
pub async fn serve(store: Arc<SessionStore>, addr: SocketAddr, sweep: Duration) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let sweeper = {
        let store = store.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(sweep);
            loop {
                tick.tick().await;
                store.sweep_idle();
            }
        })
    };
    let result = axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    sweeper.abort();
    result
}
