//! HTTP JSON API.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/api/analyze` | `{url?, html?, text?}`, exactly one |
//! | GET | `/api/analysis/{id}` | stored analysis |
//! | POST | `/api/chat` | `{analysis_id, fallacy_code, session_id?, message}` |
//! | POST | `/api/regenerate` | `{analysis_id, fallacy_code}` |
//! | GET | `/api/fallacies` | active registry |
//! | GET | `/healthz` | liveness |
//!
//! Errors are `{"error": {"code": ..., "message": ...}}`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderName, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use skeptik_core::analysis::{
    content_hash, overlay_payload, AnalysisError, AnalysisInput, Analyzer, FallacyInstance, FetchError,
    OverlayPayload, ParseMode,
};
use skeptik_core::extraction::ExtractionError;
use skeptik_core::gateway::{chat_turn, ChatContext, ChatSession, Gateway, GatewayError, ProviderConfig};
use skeptik_core::taxonomy::FallacyRegistry;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tracing::{info, warn};

use crate::cache::{cache_key, is_valid_key, registry_fingerprint, AnalysisCache, CacheEntry, CacheError, StoredArticle};
use crate::config::{ServiceConfig, TOKEN_HEADER};
use crate::fetch::HttpFetcher;
use crate::sessions::{SessionRecord, SessionStore};

pub const CACHE_STATUS_HEADER: &str = "x-skeptik-cache";

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "not_detected", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError::bad_request(rejection.body_text())
    }
}

impl From<CacheError> for ApiError {
    fn from(err: CacheError) -> Self {
        ApiError::internal(err.to_string())
    }
}

impl From<GatewayError> for ApiError {
    fn from(err: GatewayError) -> Self {
        let message = err.to_string();
        match err {
            GatewayError::Timeout(_) => ApiError::new(StatusCode::GATEWAY_TIMEOUT, "provider_timeout", message),
            GatewayError::ProviderUnavailable { .. } | GatewayError::AuthFailure { .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "provider_error", message)
            }
            GatewayError::EmptyArticle => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_content", message),
            GatewayError::UnknownCode(_) | GatewayError::InvalidRequest(_) => ApiError::bad_request(message),
            GatewayError::EmptyRegistry => ApiError::internal(message),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(err: AnalysisError) -> Self {
        let message = err.to_string();
        match err {
            AnalysisError::EmptyInput | AnalysisError::NoFetcher => ApiError::bad_request(message),
            AnalysisError::Fetch(FetchError::InvalidUrl(_)) => ApiError::bad_request(message),
            AnalysisError::Fetch(FetchError::Timeout) => {
                ApiError::new(StatusCode::GATEWAY_TIMEOUT, "fetch_timeout", message)
            }
            AnalysisError::Fetch(_) => ApiError::new(StatusCode::BAD_GATEWAY, "fetch_failed", message),
            AnalysisError::Extraction(ExtractionError::InvalidConfig(_)) => ApiError::internal(message),
            AnalysisError::Extraction(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_content", message),
            AnalysisError::Gateway(g) => g.into(),
            AnalysisError::AnalysisFailed { .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "analysis_failed", message)
            }
        }
    }
}

struct Inner {
    analyzer: Analyzer,
    registry: FallacyRegistry,
    fingerprint: String,
    provider: ProviderConfig,
    chat: ProviderConfig,
    mode: ParseMode,
    cache: AnalysisCache,
    sessions: SessionStore,
    token: Option<String>,
    expose_sessions: bool,
    allowed_origins: Vec<String>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// State with an HTTP fetcher for URL input.
    pub fn new(config: &ServiceConfig, registry: FallacyRegistry, gateway: Gateway) -> Result<Self, CacheError> {
        let analyzer = Analyzer::new(gateway).with_fetcher(Arc::new(HttpFetcher::new(config.allow_http_fetch)));
        Self::with_analyzer(config, registry, analyzer)
    }

    pub fn with_analyzer(
        config: &ServiceConfig,
        registry: FallacyRegistry,
        analyzer: Analyzer,
    ) -> Result<Self, CacheError> {
        let cache = AnalysisCache::open(&config.cache_dir)?;
        Ok(Self {
            inner: Arc::new(Inner {
                fingerprint: registry_fingerprint(&registry),
                analyzer,
                registry,
                provider: config.provider_config(),
                chat: config.chat_config(),
                mode: config.parse_mode,
                cache,
                sessions: SessionStore::new(),
                token: config.extension_token.clone(),
                expose_sessions: config.expose_sessions,
                allowed_origins: config.allowed_origins.clone(),
            }),
        })
    }

    pub fn cache(&self) -> &AnalysisCache {
        &self.inner.cache
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.inner.sessions
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/analyze", post(analyze))
        .route("/api/analysis/:id", get(get_analysis))
        .route("/api/chat", post(chat))
        .route("/api/regenerate", post(regenerate))
        .route("/api/fallacies", get(fallacies))
        .route("/api/session/:id", get(inspect_session))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));

    let origins: Vec<HeaderValue> = state
        .inner
        .allowed_origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE, HeaderName::from_static(TOKEN_HEADER)]);

    Router::new()
        .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }))
        .merge(api)
        .layer(cors)
        .with_state(state)
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(expected) = &state.inner.token {
        let supplied = request.headers().get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if supplied != Some(expected.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong extension token")
                .into_response();
        }
    }
    next.run(request).await
}

#[derive(Debug, Deserialize)]
pub struct AnalyzeRequest {
    pub url: Option<String>,
    pub html: Option<String>,
    pub text: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct AnalysisBody {
    pub analysis_id: String,
    pub version: u64,
    /// Canonical detection JSON with metadata.
    pub result: Value,
    pub payload: OverlayPayload,
}

fn body_for(entry: &CacheEntry, registry: &FallacyRegistry) -> Result<AnalysisBody, ApiError> {
    let article = entry.article.to_article();
    let payload = overlay_payload(&entry.result, &article, registry)
        .map_err(|e| ApiError::internal(format!("stored analysis inconsistent: {e}")))?;
    Ok(AnalysisBody {
        analysis_id: entry.key.clone(),
        version: entry.version,
        result: entry.result.to_canonical_value(),
        payload,
    })
}

fn with_cache_status(body: AnalysisBody, hit: bool) -> Response {
    let mut response = Json(body).into_response();
    response.headers_mut().insert(
        CACHE_STATUS_HEADER,
        HeaderValue::from_static(if hit { "hit" } else { "miss" }),
    );
    response
}

async fn analyze(
    State(state): State<AppState>,
    body: Result<Json<AnalyzeRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(request) = body?;
    let mut inputs = Vec::new();
    if let Some(url) = request.url {
        inputs.push(AnalysisInput::Url(url));
    }
    if let Some(html) = request.html {
        inputs.push(AnalysisInput::Html { html, url: None });
    }
    if let Some(text) = request.text {
        inputs.push(AnalysisInput::Text { text, url: None });
    }
    if inputs.len() != 1 {
        return Err(ApiError::bad_request(format!(
            "exactly one of url, html or text is required, got {}",
            inputs.len()
        )));
    }
    let input = inputs.remove(0);
    let s = &state.inner;
    let article = s.analyzer.extract(&input).await?;
    let key = cache_key(&content_hash(&article), &s.fingerprint, &s.provider.provider_id, &s.provider.model_name);

    if let Some(entry) = s.cache.get(&key).await? {
        info!(analysis_id = %key, "cache hit");
        return Ok(with_cache_status(body_for(&entry, &s.registry)?, true));
    }
    let analysis = s.analyzer.analyze_article(article, &s.registry, &s.provider, s.mode).await?;
    for w in &analysis.warnings {
        warn!(analysis_id = %key, path = %w.path, "{}", w.message);
    }
    let entry = CacheEntry {
        key: key.clone(),
        article: StoredArticle::from_article(&analysis.article),
        result: analysis.result,
        stored_at: Utc::now(),
        version: 0,
    };
    {
        let lock = s.cache.lock_for(&key);
        let _guard = lock.lock().await;
        s.cache.put(&entry).await?;
    }
    info!(analysis_id = %key, detected = entry.result.detected.len(), "analysis stored");
    Ok(with_cache_status(body_for(&entry, &s.registry)?, false))
}

fn check_id(id: &str) -> Result<(), ApiError> {
    if is_valid_key(id) {
        Ok(())
    } else {
        Err(ApiError::bad_request("analysis id must be 64 lowercase hex digits"))
    }
}

async fn load_entry(state: &AppState, id: &str) -> Result<CacheEntry, ApiError> {
    check_id(id)?;
    state
        .inner
        .cache
        .get(id)
        .await?
        .ok_or_else(|| ApiError::not_found(format!("no analysis {id}")))
}

async fn get_analysis(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let entry = load_entry(&state, &id).await?;
    Ok(with_cache_status(body_for(&entry, &state.inner.registry)?, true))
}

#[derive(Debug, Deserialize)]
pub struct ChatRequest {
    pub analysis_id: String,
    pub fallacy_code: String,
    pub session_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub reply: String,
    pub history_len: usize,
}

/// Validate `(analysis_id, code)` and return the entry and the instance.
async fn detected_instance(
    state: &AppState,
    analysis_id: &str,
    code: &str,
) -> Result<(CacheEntry, FallacyInstance), ApiError> {
    check_id(analysis_id)?;
    if !state.inner.registry.contains(code) {
        return Err(ApiError::bad_request(format!("unknown fallacy code {code}")));
    }
    let entry = load_entry(state, analysis_id).await?;
    let instance = entry
        .result
        .instance(code)
        .cloned()
        .ok_or_else(|| ApiError::conflict(format!("{code} was not detected in analysis {analysis_id}")))?;
    Ok((entry, instance))
}

fn chat_context(entry: &CacheEntry, instance: &FallacyInstance, registry: &FallacyRegistry) -> ChatContext {
    let fallacy = registry.get(&instance.code).expect("code checked against registry");
    let flagged_sentences = instance
        .sentence_indices
        .iter()
        .filter_map(|&i| entry.result.sentences.get(i - 1).map(|s| (i, s.clone())))
        .collect();
    ChatContext {
        fallacy_code: fallacy.code.clone(),
        fallacy_name: fallacy.name.clone(),
        definition: fallacy.definition.clone(),
        flagged_sentences,
        interventions: instance
            .layers
            .iter()
            .map(|l| (l.level.title().to_string(), l.explanation.clone()))
            .collect(),
    }
}

async fn chat(
    State(state): State<AppState>,
    body: Result<Json<ChatRequest>, JsonRejection>,
) -> Result<Json<ChatResponse>, ApiError> {
    let Json(request) = body?;
    if request.message.trim().is_empty() {
        return Err(ApiError::bad_request("message is empty"));
    }
    let (entry, instance) = detected_instance(&state, &request.analysis_id, &request.fallacy_code).await?;
    let s = &state.inner;

    match request.session_id {
        Some(session_id) => {
            let shared = s
                .sessions
                .get(&session_id)
                .ok_or_else(|| ApiError::not_found(format!("no session {session_id}")))?;
            // Held across the provider call: turns on one session queue here.
            let mut record = shared.lock().await;
            if record.analysis_id != request.analysis_id || record.session.fallacy_code != request.fallacy_code {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "session_mismatch",
                    "session belongs to a different analysis or fallacy",
                ));
            }
            let reply = chat_turn(s.analyzer.gateway(), &mut record.session, &request.message, &s.chat).await?;
            Ok(Json(ChatResponse { session_id, reply, history_len: record.session.history().len() }))
        }
        None => {
            let session_id = uuid::Uuid::new_v4().to_string();
            let mut session =
                ChatSession::new(&session_id, chat_context(&entry, &instance, &s.registry), Utc::now());
            let reply = chat_turn(s.analyzer.gateway(), &mut session, &request.message, &s.chat).await?;
            let history_len = session.history().len();
            s.sessions.insert(SessionRecord { analysis_id: request.analysis_id, session });
            info!(%session_id, "chat session created");
            Ok(Json(ChatResponse { session_id, reply, history_len }))
        }
    }
}

async fn inspect_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    if !state.inner.expose_sessions {
        return Err(ApiError::not_found("session inspection is disabled"));
    }
    let shared = state
        .inner
        .sessions
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no session {id}")))?;
    let record = shared.lock().await;
    Ok(Json(json!({
        "session_id": record.session.session_id,
        "analysis_id": record.analysis_id,
        "fallacy_code": record.session.fallacy_code,
        "history": record.session.history(),
    })))
}

#[derive(Debug, Deserialize)]
pub struct RegenerateRequest {
    pub analysis_id: String,
    pub fallacy_code: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegenerateResponse {
    pub analysis_id: String,
    pub version: u64,
    pub instance: FallacyInstance,
}

async fn regenerate(
    State(state): State<AppState>,
    body: Result<Json<RegenerateRequest>, JsonRejection>,
) -> Result<Json<RegenerateResponse>, ApiError> {
    let Json(request) = body?;
    let (entry, _) = detected_instance(&state, &request.analysis_id, &request.fallacy_code).await?;
    let s = &state.inner;
    let article = entry.article.to_article();
    let instance = s
        .analyzer
        .regenerate(&article, &s.registry, &request.fallacy_code, &s.provider, s.mode)
        .await?
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_GATEWAY,
                "regeneration_empty",
                format!("the model no longer flags {}; the stored instance is unchanged", request.fallacy_code),
            )
        })?;

    let lock = s.cache.lock_for(&entry.key);
    let _guard = lock.lock().await;
    // Re-read under the lock so concurrent regenerations each bump the version.
    let mut current = load_entry(&state, &entry.key).await?;
    match current.result.detected.iter_mut().find(|i| i.code == instance.code) {
        Some(slot) => *slot = instance.clone(),
        None => return Err(ApiError::conflict(format!("{} was removed concurrently", instance.code))),
    }
    current.version += 1;
    s.cache.put(&current).await?;
    info!(analysis_id = %current.key, code = %instance.code, version = current.version, "instance regenerated");
    Ok(Json(RegenerateResponse { analysis_id: current.key, version: current.version, instance }))
}

async fn fallacies(State(state): State<AppState>) -> Json<Value> {
    let registry = &state.inner.registry;
    let entries: Vec<Value> = registry
        .entries()
        .iter()
        .map(|f| {
            json!({
                "code": f.code,
                "name": f.name,
                "definition": f.definition,
                "example": f.example,
                "group_id": f.group_id,
                "color_index": f.color_index(),
                "context_needed": f.context_needed,
                "wikipedia_link": format!("https://en.wikipedia.org/wiki/{}", f.wikipedia_title()),
            })
        })
        .collect();
    Json(json!({"version": registry.version(), "fallacies": entries}))
}
