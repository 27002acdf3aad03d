//! HTTP front end for annotation campaigns.
//!
//! | Method | Path | Response |
//! |---|---|---|
//! | GET | `/api/campaigns/{id}/next?annotator={aid}` | 200 task, 204 when none is left |
//! | POST | `/api/campaigns/{id}/labels` | 201 acknowledgment, 422 `{rule, detail}` |
//! | GET | `/api/campaigns/{id}/progress` | counts per status and verdict |
//! | GET | `/api/campaigns/{id}/export` | consolidated labels as JSON lines |
//! | GET | `/media/...` | static audio files |
//!
//! Each campaign sits behind its own mutex, so assignment and log appends
//! are serialized per campaign.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use mutox::annotation::{AnnotationError, Campaign, RawResponse};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    campaigns: Arc<HashMap<String, Arc<Mutex<Campaign>>>>,
    clock: Clock,
}

impl AppState {
    pub fn new(campaigns: impl IntoIterator<Item = Campaign>) -> Self {
        Self::with_clock(campaigns, Arc::new(Utc::now))
    }

    pub fn with_clock(campaigns: impl IntoIterator<Item = Campaign>, clock: Clock) -> Self {
        let campaigns = campaigns
            .into_iter()
            .map(|c| (c.id().to_string(), Arc::new(Mutex::new(c))))
            .collect();
        Self {
            campaigns: Arc::new(campaigns),
            clock,
        }
    }

    fn campaign(&self, id: &str) -> Result<Arc<Mutex<Campaign>>, ApiError> {
        self.campaigns.get(id).cloned().ok_or_else(|| ApiError {
            status: StatusCode::NOT_FOUND,
            body: ErrorBody {
                rule: "unknown_campaign".into(),
                detail: format!("no campaign `{id}`"),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub rule: String,
    pub detail: String,
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn unprocessable(rule: &str, detail: impl Into<String>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: ErrorBody {
                rule: rule.into(),
                detail: detail.into(),
            },
        }
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        match e {
            AnnotationError::Validation(v) => Self::unprocessable(&v.rule, v.detail),
            other => Self {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                body: ErrorBody {
                    rule: "internal".into(),
                    detail: other.to_string(),
                },
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

async fn next_task(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ApiError> {
    let annotator = q
        .annotator
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| ApiError::unprocessable("annotator_required", "query parameter `annotator` is required"))?;
    let campaign = state.campaign(&id)?;
    let now = (state.clock)();
    let task = campaign.lock().expect("campaign lock").next_task(&annotator, now);
    Ok(match task {
        Some(t) => (StatusCode::OK, Json(t)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn submit_label(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<RawResponse>, JsonRejection>,
) -> Result<Response, ApiError> {
    let campaign = state.campaign(&id)?;
    let Json(raw) = body.map_err(|e| ApiError::unprocessable("malformed_body", e.body_text()))?;
    let now = (state.clock)();
    let ack = campaign.lock().expect("campaign lock").submit_raw(raw, now)?;
    Ok((StatusCode::CREATED, Json(ack)).into_response())
}

async fn progress(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let campaign = state.campaign(&id)?;
    let now = (state.clock)();
    let p = campaign.lock().expect("campaign lock").progress(now);
    Ok(Json(p).into_response())
}

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let campaign = state.campaign(&id)?;
    let labels = campaign.lock().expect("campaign lock").export();
    let mut body = String::new();
    for l in &labels {
        body.push_str(&serde_json::to_string(l).expect("label serializes"));
        body.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub fn router(state: AppState, media_root: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/campaigns/{id}/next", get(next_task))
        .route("/api/campaigns/{id}/labels", post(submit_label))
        .route("/api/campaigns/{id}/progress", get(progress))
        .route("/api/campaigns/{id}/export", get(export))
        .with_state(state);
    match media_root {
        Some(root) => api.nest_service("/media", ServeDir::new(root)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}
