//! JSON HTTP API over a [`DocumentStore`].
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/health` | name and version |
//! | GET | `/videos` | `[{video_id, title, duration_s, processed}]` |
//! | POST | `/videos/{id}/process?config=k=v;...` | `202` with the new document |
//! | GET | `/videos/{id}/document` | stored document bytes |
//! | GET | `/videos/{id}/keyframes` | keyframe summaries |
//! | GET | `/videos/{id}/keyframes/{k}/objects` | objects of keyframe `k` (0-based) with `narration_text` |
//!
//! Errors come back as `{"error": message}`.

use super::pipeline::{process_annotations, PipelineError, StageFailure};
use super::store::{DocumentStore, StoreError};
use crate::backends::Backends;
use crate::config::PipelineConfig;
use crate::model::{AnnotationFile, DescriptionSource};
use crate::objects::{narration_text, DescribedObject};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub type BackendFactory = Arc<dyn Fn(&AnnotationFile) -> Backends + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<DocumentStore>,
    /// Config that `?config=` overrides apply on top of.
    pub base_config: PipelineConfig,
    pub backends: BackendFactory,
}

impl AppState {
    /// State with environment-selected backends.
    pub fn new(store: Arc<DocumentStore>, base_config: PipelineConfig) -> Self {
        Self { store, base_config, backends: Arc::new(Backends::from_env) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeSummary {
    pub k: usize,
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub frame_description: String,
    pub source: DescriptionSource,
    pub object_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    #[serde(flatten)]
    pub object: DescribedObject,
    pub narration_text: String,
}

#[derive(Debug, Deserialize)]
pub struct ProcessQuery {
    pub config: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        Self { status, message: message.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::InvalidId(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e.failure {
            StageFailure::Config(_) => StatusCode::BAD_REQUEST,
            StageFailure::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ if e.is_unavailable() => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/videos", get(list_videos))
        .route("/videos/{id}/process", post(process))
        .route("/videos/{id}/document", get(document))
        .route("/videos/{id}/keyframes", get(keyframes))
        .route("/videos/{id}/keyframes/{k}/objects", get(objects))
        .with_state(state)
}

/// Serves `state` on `listener` until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        name: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn list_videos(State(s): State<AppState>) -> Result<Response, ApiError> {
    let videos = blocking(move || Ok(s.store.list_videos()?)).await?;
    Ok(Json(videos).into_response())
}

async fn process(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ProcessQuery>,
) -> Result<Response, ApiError> {
    let mut config = s.base_config.clone();
    if let Some(kv) = &q.config {
        config.apply_kv(kv).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    }
    let bytes = blocking(move || {
        let annotations = s.store.load_annotations(&id)?;
        let backends = (s.backends)(&annotations);
        let doc = process_annotations(&annotations, &config, &backends, s.store.sound_cache())?;
        s.store.save_document(&doc)?;
        s.store.persist_sounds()?;
        Ok(s.store.load_document_bytes(&id)?)
    })
    .await?;
    Ok((StatusCode::ACCEPTED, [(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn document(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let bytes = blocking(move || Ok(s.store.load_document_bytes(&id)?)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn keyframes(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let doc = blocking(move || Ok(s.store.load_document(&id)?)).await?;
    let out: Vec<KeyframeSummary> = doc
        .keyframes
        .iter()
        .enumerate()
        .map(|(k, kf)| KeyframeSummary {
            k,
            frame_index: kf.frame_index,
            timestamp_s: kf.timestamp_s,
            frame_description: kf.frame_description.clone(),
            source: kf.source,
            object_count: kf.objects.len(),
        })
        .collect();
    Ok(Json(out).into_response())
}

async fn objects(
    State(s): State<AppState>,
    Path((id, k)): Path<(String, usize)>,
) -> Result<Response, ApiError> {
    let doc = blocking(move || Ok(s.store.load_document(&id)?)).await?;
    let kf = doc
        .keyframes
        .get(k)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no keyframe {k}")))?;
    let out = kf
        .objects
        .iter()
        .map(|o| {
            Ok(ObjectView {
                narration_text: narration_text(o)
                    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?,
                object: o.clone(),
            })
        })
        .collect::<Result<Vec<_>, ApiError>>()?;
    Ok(Json(out).into_response())
}
