use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use lintfix_core::metrics::{aggregate_adoption, WeeklyAdoption};

use crate::store::{ActionRequest, ReviewError, ReviewStore, SuggestionState};

/// Mount point of the static review bundle.
pub const UI_MOUNT: &str = "/ui";

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: String,
}

pub struct ApiError(ReviewError);

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            ReviewError::UnknownSuggestion(_) => (StatusCode::NOT_FOUND, "unknown_suggestion"),
            ReviewError::IllegalTransition { .. } => (StatusCode::CONFLICT, "illegal_transition"),
            ReviewError::MissingCommittedDiff => (StatusCode::BAD_REQUEST, "missing_committed_diff"),
            ReviewError::Feedback(_) => (StatusCode::UNPROCESSABLE_ENTITY, "feedback_rejected"),
            ReviewError::Parse { .. } | ReviewError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store"),
        };
        let body = ErrorBody {
            error: self.0.to_string(),
            kind: kind.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    /// `all`, or one state name. Defaults to `pending`.
    state: Option<String>,
}

async fn list(State(store): State<Arc<ReviewStore>>, Query(q): Query<ListQuery>) -> Response {
    let filter = match q.state.as_deref() {
        None => Some(SuggestionState::Pending),
        Some("all") => None,
        Some(other) => match serde_json::from_value(serde_json::Value::String(other.to_string())) {
            Ok(s) => Some(s),
            Err(_) => {
                let body = ErrorBody {
                    error: format!("unknown state `{other}`"),
                    kind: "bad_request".into(),
                };
                return (StatusCode::BAD_REQUEST, Json(body)).into_response();
            }
        },
    };
    Json(store.list(filter)).into_response()
}

async fn detail(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(store.get(&id)?).into_response())
}

async fn diff(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = store.get(&id)?;
    Ok(([(header::CONTENT_TYPE, "text/x-diff; charset=utf-8")], s.unified_diff).into_response())
}

async fn events(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    store.get(&id)?;
    let mine: Vec<_> = store.events()?.into_iter().filter(|e| e.suggestion_id == id).collect();
    Ok(Json(mine).into_response())
}

async fn act(
    State(store): State<Arc<ReviewStore>>,
    Path(id): Path<String>,
    Json(req): Json<ActionRequest>,
) -> Result<Response, ApiError> {
    // Commits run the linter; keep that off the async workers.
    let result = tokio::task::spawn_blocking(move || store.act(&id, req))
        .await
        .map_err(|e| ReviewError::Io(std::io::Error::other(e.to_string())))??;
    Ok(Json(result).into_response())
}

async fn weekly(State(store): State<Arc<ReviewStore>>) -> Result<Json<BTreeMap<String, WeeklyAdoption>>, ApiError> {
    Ok(Json(aggregate_adoption(&store.adoptions()?)))
}

/// API routes, plus the static bundle under [`UI_MOUNT`] when `ui_dir` is set.
pub fn router(store: Arc<ReviewStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/suggestions", get(list))
        .route("/suggestions/{id}", get(detail))
        .route("/suggestions/{id}/diff", get(diff))
        .route("/suggestions/{id}/events", get(events))
        .route("/suggestions/{id}/actions", post(act))
        .route("/adoption/weekly", get(weekly))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.nest_service(UI_MOUNT, ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(store: Arc<ReviewStore>, ui_dir: Option<PathBuf>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store, ui_dir)).await
}
