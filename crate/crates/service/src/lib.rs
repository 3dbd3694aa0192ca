//! HTTP front end over [`Engine`].
//!
//! `GET /epochs/{epoch}/batches/{index}` answers with the same records the
//! CLI writes for that batch, serialized identically, so a trainer can pull
//! batches over the network and get byte-for-byte the offline stream. Query
//! parameters `alpha`, `beta`, `languages` (comma separated subset of the
//! configured list) and `mode` override the loaded config for one request.
//!
//! The server comes up before its resources finish loading. Until then every
//! route but `/healthz` answers 503; a failed load turns them into 500s
//! carrying the reason.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, OnceLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use csf_core::{
    encode_instance, AugmentationConfig, Engine, LanguageCode, Mode, Ratio, StreamError,
    WordPieceVocab,
};
use serde_json::json;

/// Everything a ready server needs.
#[derive(Debug)]
pub struct Resources {
    pub engine: Engine,
    pub vocab: Option<WordPieceVocab>,
    pub max_len: usize,
}

type LoadOutcome = Result<Arc<Resources>, String>;

#[derive(Debug, Clone, Default)]
pub struct AppState {
    slot: Arc<OnceLock<LoadOutcome>>,
}

impl AppState {
    /// A state that answers 503 until [`AppState::finish`] is called.
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(resources: Resources) -> Self {
        let state = Self::loading();
        state.finish(Ok(resources));
        state
    }

    /// Records the load outcome. Only the first call has any effect.
    pub fn finish(&self, outcome: Result<Resources, String>) -> bool {
        self.slot.set(outcome.map(Arc::new)).is_ok()
    }

    fn resources(&self) -> Result<Arc<Resources>, ApiError> {
        match self.slot.get() {
            None => Err(ApiError::Loading),
            Some(Err(reason)) => Err(ApiError::LoadFailed(reason.clone())),
            Some(Ok(r)) => Ok(r.clone()),
        }
    }
}

#[derive(Debug)]
enum ApiError {
    Loading,
    LoadFailed(String),
    NotFound(String),
    Invalid(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Loading => (
                StatusCode::SERVICE_UNAVAILABLE,
                json!({"status": "loading", "error": "resources are still loading"}),
            ),
            ApiError::LoadFailed(reason) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({"status": "failed", "error": reason}),
            ),
            ApiError::NotFound(msg) => (StatusCode::NOT_FOUND, json!({"error": msg})),
            ApiError::Invalid(msg) => (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": msg})),
            ApiError::Internal(msg) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": msg})),
        };
        (status, Json(body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/meta", get(meta))
        .route("/epochs/{epoch}/batches/{index}", get(batch))
        .with_state(state)
}

async fn healthz(State(state): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    state.resources()?;
    Ok(Json(json!({"status": "ok"})))
}

async fn meta(State(state): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    let r = state.resources()?;
    let engine = &r.engine;
    Ok(Json(json!({
        "version": csf_core::VERSION,
        "n": engine.corpus().len(),
        "batch_size": engine.batch_size(),
        "batches_per_epoch": engine.batches_per_epoch(),
        "source_lang": engine.pack().source_lang(),
        "languages": engine.config().languages,
        "pack_languages": engine.pack().targets().collect::<Vec<_>>(),
        "config": engine.config(),
        "vocab_size": r.vocab.as_ref().map(|v| v.len()),
        "max_len": r.vocab.as_ref().map(|_| r.max_len),
    })))
}

fn parse_index(name: &str, raw: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| {
        ApiError::Invalid(format!(
            "{name} must be a non-negative integer, got {raw:?}"
        ))
    })
}

fn parse_ratio(name: &str, raw: &str) -> Result<Ratio, ApiError> {
    let v: f64 = raw
        .parse()
        .map_err(|_| ApiError::Invalid(format!("{name} must be a number, got {raw:?}")))?;
    Ratio::new(v).map_err(|e| ApiError::Invalid(format!("{name}: {e}")))
}

/// Applies per-request overrides to the loaded config.
fn overridden(
    base: &AugmentationConfig,
    params: &HashMap<String, String>,
) -> Result<AugmentationConfig, ApiError> {
    let mut cfg = base.clone();
    for (key, raw) in params {
        match key.as_str() {
            "alpha" => cfg.alpha = parse_ratio("alpha", raw)?,
            "beta" => cfg.beta = parse_ratio("beta", raw)?,
            "mode" => cfg.mode = raw.parse::<Mode>().map_err(ApiError::Invalid)?,
            "languages" => {
                let mut langs = Vec::new();
                for part in raw.split(',').map(str::trim) {
                    let code: LanguageCode = part
                        .parse()
                        .map_err(|e| ApiError::Invalid(format!("languages: {e}")))?;
                    if !base.languages.contains(&code) {
                        return Err(ApiError::Invalid(format!(
                            "languages: {code} is not among the configured languages"
                        )));
                    }
                    if langs.contains(&code) {
                        return Err(ApiError::Invalid(format!(
                            "languages: {code} listed more than once"
                        )));
                    }
                    langs.push(code);
                }
                cfg.languages = langs;
            }
            other => {
                return Err(ApiError::Invalid(format!(
                    "unknown query parameter {other:?}"
                )))
            }
        }
    }
    Ok(cfg)
}

async fn batch(
    State(state): State<AppState>,
    Path((epoch, index)): Path<(String, String)>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let r = state.resources()?;
    let epoch = parse_index("epoch", &epoch)?;
    let index = parse_index("batch index", &index)?;
    let cfg = overridden(r.engine.config(), &params)?;

    let body = tokio::task::spawn_blocking(move || render_batch(&r, &cfg, epoch, index))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

fn render_batch(
    r: &Resources,
    cfg: &AugmentationConfig,
    epoch: u64,
    index: u64,
) -> Result<Vec<u8>, ApiError> {
    let records = r
        .engine
        .batch_with(cfg, epoch, index)
        .map_err(|e| match e {
            StreamError::BatchOutOfRange { .. } => ApiError::NotFound(e.to_string()),
            StreamError::Augment(_) => ApiError::Invalid(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        })?;
    let encodings = match &r.vocab {
        Some(vocab) => records
            .iter()
            .map(|a| encode_instance(&a.instance, vocab, r.max_len).map(Some))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ApiError::Internal(e.to_string()))?,
        None => vec![None; records.len()],
    };
    let out: Vec<_> = records
        .iter()
        .zip(&encodings)
        .map(|(a, enc)| a.output_record(enc.as_ref()))
        .collect();
    serde_json::to_vec(&out).map_err(|e| ApiError::Internal(e.to_string()))
}

/// Binds `addr`, starts answering immediately, and runs `load` on a blocking
/// thread; the outcome flips the server to ready or failed.
pub async fn serve<F>(addr: SocketAddr, load: F) -> std::io::Result<()>
where
    F: FnOnce() -> Result<Resources, String> + Send + 'static,
{
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    let state = AppState::loading();
    let loader = state.clone();
    tokio::task::spawn_blocking(move || {
        loader.finish(load());
    });
    axum::serve(listener, router(state)).await
}
