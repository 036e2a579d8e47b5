use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use scattermesh_core::harness::PipelineConfig;

use crate::error::{ApiError, ApiResult};
use crate::session::{default_config, DocumentView, GatherRequest, Session, SessionView};
use crate::state::AppState;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/corpora", post(create_corpus))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/gather", post(gather))
        .route("/api/sessions/{id}/back", post(back))
        .route("/api/sessions/{id}/documents/{doc_id}", get(document))
        .route("/api/sessions/{id}/projection", get(projection));
    let api = match &state.config().ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir)),
        None => api,
    };
    api.fallback(|| async { ApiError::NotFound("no such route".into()) })
        .with_state(state)
}

/// Parses a JSON body so malformed input still gets a JSON error.
fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

#[derive(Deserialize)]
struct CorpusRequest {
    path: String,
    #[serde(default)]
    truth: Option<String>,
}

async fn create_corpus(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: CorpusRequest = parse(&body)?;
    let path = state.resolve(&req.path)?;
    let truth: Option<PathBuf> = req.truth.as_deref().map(|t| state.resolve(t)).transpose()?;
    let entry = blocking(move || state.ingest(path, truth)).await?;
    Ok(Json(json!({
        "corpus_id": entry.id,
        "documents": entry.corpus.len(),
        "labeled": entry.truth.is_some(),
    })))
}

#[derive(Deserialize)]
struct SessionRequest {
    corpus_id: String,
    #[serde(default)]
    config: Option<PipelineConfig>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<SessionView>> {
    let req: SessionRequest = parse(&body)?;
    let entry = state.corpus(&req.corpus_id)?;
    let config = req.config.unwrap_or_else(default_config);
    let session = blocking(move || {
        let s = Session::create(&entry, config, uuid::Uuid::new_v4().simple().to_string())?;
        state.persist_session(&s)?;
        state.insert_session(s.clone());
        Ok(s)
    })
    .await?;
    Ok(Json(session.view()))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(state.session(&id)?.view()))
}

/// Runs a transition under the session's writer lock and publishes the
/// result only if it succeeds.
async fn transition(
    state: AppState,
    id: String,
    step: impl FnOnce(&Session, &crate::session::CorpusEntry) -> ApiResult<Session> + Send + 'static,
) -> ApiResult<Json<SessionView>> {
    let slot = state.slot(&id)?;
    let _writer = slot.writer.lock().await;
    let current = slot.current.read().expect("session lock").clone();
    let entry = state.corpus(&current.corpus_id)?;
    let st = state.clone();
    let next = blocking(move || {
        let next = step(&current, &entry)?;
        st.persist_session(&next)?;
        Ok(next)
    })
    .await?;
    let view = next.view();
    *slot.current.write().expect("session lock") = Arc::new(next);
    Ok(Json(view))
}

async fn gather(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<SessionView>> {
    let req: GatherRequest = parse(&body)?;
    transition(state, id, move |s, entry| s.gather(entry, &req)).await
}

async fn back(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    transition(state, id, |s, _| s.back()).await
}

async fn document(
    State(state): State<AppState>,
    Path((id, doc_id)): Path<(String, String)>,
) -> ApiResult<Json<DocumentView>> {
    let session = state.session(&id)?;
    let entry = state.corpus(&session.corpus_id)?;
    Ok(Json(session.document(&entry, &doc_id)?))
}

async fn projection(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = state.session(&id)?;
    Ok(Json(json!({
        "generation": session.current.generation,
        "points": session.current.projection,
    })))
}
