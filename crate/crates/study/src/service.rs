//! REST interface over the study store and blob directory.
//!
//! | method | path | success |
//! |---|---|---|
//! | POST | `/studies/{study}/participants` | 201 `{user_id, tasks}` |
//! | GET | `/studies/{study}/participants/{uid}/task` | 200 next task or completion |
//! | POST | `/studies/{study}/participants/{uid}/task` | 200 reward and feedback |
//! | GET | `/blobs/{id}` | 200 raw blob bytes |
//! | GET | `/blobs/{id}/schema` | 200 blob sidecar |
//!
//! Structured bodies are wrapped in an [`ApiEnvelope`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bayesvis_core::samples::SampleSidecar;
use bayesvis_core::scoring::{OptimalResponse, ResponsePayload};
use bayesvis_core::task::{ObjectiveKind, TaskSpec};
use bayesvis_core::CategoricalDistribution;
use serde::{Deserialize, Serialize};

use crate::blobs::{BlobError, BlobStore};
use crate::store::{ActionLogEntry, NextTask, StudyError, StudyStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ApiEnvelope<T> {
    Ok { body: T },
    Error { error_code: String, error_message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscribeBody {
    pub user_id: String,
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TaskBody {
    Task {
        position: usize,
        total: usize,
        cumulative_reward: f64,
        task: Box<TaskSpec>,
        blob_url: String,
        schema: SampleSidecar,
    },
    Complete {
        answered: usize,
        cumulative_reward: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub task_id: String,
    pub payload: ResponsePayload,
    #[serde(default)]
    pub action_log: Vec<ActionLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub objective: ObjectiveKind,
    pub objective_value: f64,
    pub entailed: CategoricalDistribution,
    pub optimal: OptimalResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitBody {
    pub reward: f64,
    pub cumulative_reward: f64,
    /// Present when the task enables feedback.
    pub feedback: Option<Feedback>,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<StudyStore>,
    pub blobs: Arc<BlobStore>,
}

struct ApiError(StatusCode, &'static str, String);

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        let (status, code) = match &e {
            StudyError::NotFound(_) | StudyError::Blob(BlobError::NotFound(_)) => (StatusCode::NOT_FOUND, "not_found"),
            StudyError::SequenceViolation { .. } => (StatusCode::CONFLICT, "sequence_violation"),
            StudyError::AlreadyAnswered(_) => (StatusCode::CONFLICT, "already_answered"),
            StudyError::InvalidResponse(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_response"),
            StudyError::Scoring(_) => (StatusCode::UNPROCESSABLE_ENTITY, "scoring_failed"),
            StudyError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "request failed");
        }
        ApiError(status, code, e.to_string())
    }
}

impl From<BlobError> for ApiError {
    fn from(e: BlobError) -> Self {
        StudyError::Blob(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body: ApiEnvelope<()> = ApiEnvelope::Error {
            error_code: self.1.to_owned(),
            error_message: self.2,
        };
        (self.0, Json(body)).into_response()
    }
}

fn ok<T: Serialize>(status: StatusCode, body: T) -> Response {
    (status, Json(ApiEnvelope::Ok { body })).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/studies/{study}/participants", post(subscribe))
        .route("/studies/{study}/participants/{uid}/task", get(get_task).post(post_response))
        .route("/blobs/{id}", get(get_blob))
        .route("/blobs/{id}/schema", get(get_schema))
        .with_state(state)
}

async fn subscribe(State(s): State<AppState>, Path(study): Path<String>) -> Result<Response, ApiError> {
    let p = blocking(move || Ok(s.store.subscribe(&study)?)).await?;
    Ok(ok(
        StatusCode::CREATED,
        SubscribeBody {
            user_id: p.user_id,
            tasks: p.task_order.len(),
        },
    ))
}

async fn get_task(State(s): State<AppState>, Path((study, uid)): Path<(String, String)>) -> Result<Response, ApiError> {
    let body = blocking(move || {
        Ok(match s.store.next_task(&study, &uid)? {
            NextTask::Task {
                position,
                total,
                cumulative_reward,
                task,
            } => {
                let blob = s.blobs.get(&task.model_ref)?;
                TaskBody::Task {
                    position,
                    total,
                    cumulative_reward,
                    blob_url: format!("/blobs/{}", task.model_ref),
                    schema: blob.sidecar.clone(),
                    task,
                }
            }
            NextTask::Complete {
                answered,
                cumulative_reward,
            } => TaskBody::Complete {
                answered,
                cumulative_reward,
            },
        })
    })
    .await?;
    Ok(ok(StatusCode::OK, body))
}

async fn post_response(
    State(s): State<AppState>,
    Path((study, uid)): Path<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: SubmitRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_response",
            format!("malformed submission: {e}"),
        )
    })?;
    let body = blocking(move || {
        let feedback_enabled = s
            .store
            .study(&study)?
            .task(&req.task_id)
            .is_none_or(|t| t.feedback_enabled);
        let record = s
            .store
            .record_response(&study, &uid, &req.task_id, req.payload, req.action_log, &s.blobs)?;
        let cumulative_reward = s.store.participant(&study, &uid)?.cumulative_reward;
        let score = record.score;
        Ok(SubmitBody {
            reward: score.reward,
            cumulative_reward,
            feedback: feedback_enabled.then_some(Feedback {
                objective: score.objective,
                objective_value: score.objective_value,
                entailed: score.entailed,
                optimal: score.optimal,
            }),
        })
    })
    .await?;
    Ok(ok(StatusCode::OK, body))
}

async fn get_blob(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let blob = blocking(move || Ok(s.blobs.get(&id)?)).await?;
    let mut resp = blob.bytes.clone().into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"));
    headers.insert(
        header::CACHE_CONTROL,
        HeaderValue::from_static("public, max-age=31536000, immutable"),
    );
    Ok(resp)
}

async fn get_schema(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let blob = blocking(move || Ok(s.blobs.get(&id)?)).await?;
    Ok(ok(StatusCode::OK, blob.sidecar.clone()))
}

/// Binds `bind` and serves until the process is stopped.
pub async fn serve(state: AppState, bind: std::net::SocketAddr) -> std::io::Result<()> {
    serve_listener(state, tokio::net::TcpListener::bind(bind).await?).await
}

/// Serves on an already bound listener.
pub async fn serve_listener(state: AppState, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state)).await
}
