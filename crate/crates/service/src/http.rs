//! HTTP/JSON routes. Errors are returned as `{code, message, detail}`.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use gridlock_core::activities::{cohort_report, CohortReport};
use gridlock_core::content::ContentBlock;
use gridlock_core::sim::ArchetypeMix;
use gridlock_core::telemetry::EventPayload;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::engine::{AssistanceDecision, Engine, Objective, SessionInfo, Submission};
use crate::error::ServiceError;
use crate::ops;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;
type Shared = Arc<Engine>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))?
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("malformed request body: {e}")))
}

#[derive(Debug, Deserialize)]
pub struct OpenRequest {
    pub curriculum: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

async fn open_session(State(engine): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<SessionInfo>), ServiceError> {
    let req: OpenRequest = parse(&body)?;
    let info = blocking(move || engine.open_session(&req.curriculum, req.seed)).await?;
    Ok((StatusCode::CREATED, Json(info)))
}

#[derive(Debug, Deserialize)]
pub struct EventRequest {
    #[serde(flatten)]
    pub payload: EventPayload,
    #[serde(default)]
    pub ts: Option<i64>,
    #[serde(default)]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Recorded {
    pub seq: u64,
}

async fn post_event(State(engine): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Recorded> {
    let req: EventRequest = parse(&body)?;
    let seq = blocking(move || engine.ingest(&id, req.payload, req.ts, req.idempotency_key.as_deref())).await?;
    Ok(Json(Recorded { seq }))
}

async fn assist(State(engine): State<Shared>, Path((id, block)): Path<(String, String)>) -> ApiResult<AssistanceDecision> {
    Ok(Json(blocking(move || engine.request_assistance(&id, &block)).await?))
}

#[derive(Debug, Deserialize)]
pub struct SubmitRequest {
    pub source: String,
}

async fn submit(
    State(engine): State<Shared>,
    Path((id, block)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Submission> {
    let req: SubmitRequest = parse(&body)?;
    Ok(Json(blocking(move || engine.submit_code(&id, &block, &req.source)).await?))
}

async fn objective(State(engine): State<Shared>, Path(id): Path<String>) -> ApiResult<Objective> {
    Ok(Json(engine.objective(&id)?))
}

async fn end_session(State(engine): State<Shared>, Path(id): Path<String>) -> ApiResult<Recorded> {
    let seq = blocking(move || engine.end_session(&id)).await?;
    Ok(Json(Recorded { seq }))
}

async fn content(State(engine): State<Shared>, Path(block): Path<String>) -> ApiResult<ContentBlock> {
    let b = engine.curriculum().block(&block).map_err(|_| ServiceError::UnknownBlock(block.clone()))?;
    Ok(Json(b.clone()))
}

async fn how_to_play(State(engine): State<Shared>, Path(block): Path<String>) -> ApiResult<Value> {
    let g = engine.curriculum();
    let b = g.block(&block).map_err(|_| ServiceError::UnknownBlock(block.clone()))?;
    Ok(Json(json!({
        "block": b.id,
        "title": b.title,
        "activity": b.activity.kind_name(),
        "instructions": b.how_to_play,
        "game": g.how_to_play(),
    })))
}

#[derive(Debug, Deserialize)]
pub struct TrainRequest {
    /// Archetype mix document; the shipped mix when absent.
    #[serde(default)]
    pub mix: Option<String>,
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainResponse {
    pub episodes: usize,
    pub seed: u64,
    pub curve: Vec<(usize, f64)>,
}

async fn admin_train(State(engine): State<Shared>, body: Bytes) -> ApiResult<TrainResponse> {
    let req: TrainRequest = parse(&body)?;
    let mix = match &req.mix {
        Some(text) => ArchetypeMix::from_toml(text)?,
        None => ArchetypeMix::shipped(),
    };
    let (episodes, seed) = (req.episodes, req.seed);
    let outcome = blocking(move || engine.train(&mix, episodes, seed)).await?;
    Ok(Json(TrainResponse { episodes, seed, curve: outcome.curve }))
}

async fn admin_report(State(engine): State<Shared>) -> ApiResult<Vec<CohortReport>> {
    let reports = blocking(move || {
        let events = engine.log().events();
        let pairs = ops::group_pairs(engine.curriculum(), &events)?;
        cohort_report(&[(engine.curriculum().id().to_string(), pairs)]).map_err(|e| ServiceError::BadRequest(e.to_string()))
    })
    .await?;
    Ok(Json(reports))
}

async fn not_found() -> ServiceError {
    ServiceError::NotFound("no such route".into())
}

pub fn router(engine: Arc<Engine>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", delete(end_session))
        .route("/sessions/{id}/events", post(post_event))
        .route("/sessions/{id}/assist/{block}", get(assist))
        .route("/sessions/{id}/submit/{block}", post(submit))
        .route("/sessions/{id}/objective", get(objective))
        .route("/content/{block}", get(content))
        .route("/content/{block}/howtoplay", get(how_to_play))
        .route("/admin/train", post(admin_train))
        .route("/admin/report", get(admin_report))
        .with_state(engine);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}
