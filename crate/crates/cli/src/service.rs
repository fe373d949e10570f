//! Stateless HTTP JSON service over [`crate::api`].
//!
//! Every response other than the health check is an envelope holding
//! `api_version`, `request_id` and exactly one of `result` or `error`.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};
use symdiag_core::metrics::{EmbeddingProvider, HttpEmbeddingProvider};

use crate::api::{self, ApiError, API_VERSION};

/// Large enough for a pair of base64 PNGs at the maximum render size.
pub const BODY_LIMIT: usize = 64 * 1024 * 1024;
const REQUEST_ID_HEADER: &str = "x-request-id";

/// Read-only configuration shared by all handlers.
#[derive(Clone, Default)]
pub struct AppState {
    pub provider: Option<Arc<dyn EmbeddingProvider>>,
}

impl AppState {
    /// Picks up the embedding endpoint from `SYMDIAG_EMBED_URL`, if set.
    pub fn from_env() -> Self {
        Self {
            provider: HttpEmbeddingProvider::from_env()
                .map(|p| Arc::new(p) as Arc<dyn EmbeddingProvider>),
        }
    }

    fn provider(&self) -> Option<&dyn EmbeddingProvider> {
        self.provider.as_deref()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/score/logic", post(score_logic))
        .route("/v1/score/visual", post(score_visual))
        .route("/v1/render", post(render))
        .route("/v1/shape/advantages", post(shape_advantages))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("symdiag listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// The caller's `x-request-id` when present and printable, otherwise a hash
/// of the route and body so identical requests get identical responses.
fn request_id(headers: &HeaderMap, route: &str, body: &[u8]) -> String {
    if let Some(id) = headers.get(REQUEST_ID_HEADER).and_then(|v| v.to_str().ok()) {
        if !id.is_empty() && id.len() <= 128 {
            return id.to_string();
        }
    }
    let mut h = DefaultHasher::new();
    route.hash(&mut h);
    body.hash(&mut h);
    format!("req-{:016x}", h.finish())
}

fn envelope(request_id: &str, key: &str, payload: Value) -> Value {
    let mut m = Map::new();
    m.insert("api_version".into(), json!(API_VERSION));
    m.insert("request_id".into(), json!(request_id));
    m.insert(key.into(), payload);
    Value::Object(m)
}

fn error_response(request_id: &str, e: &ApiError) -> Response {
    let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(envelope(request_id, "error", e.to_json()))).into_response()
}

fn decode_error(e: serde_json::Error) -> ApiError {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => ApiError::new(422, "invalid_request", e.to_string()),
        _ => ApiError::new(400, "malformed_json", e.to_string()),
    }
}

/// Decodes the body, runs `f` on the blocking pool and wraps the outcome.
async fn handle<T, F>(
    state: AppState,
    headers: HeaderMap,
    route: &str,
    body: Bytes,
    f: F,
) -> Response
where
    T: DeserializeOwned + Send + 'static,
    F: FnOnce(T, &AppState) -> Result<Value, ApiError> + Send + 'static,
{
    let id = request_id(&headers, route, &body);
    let req: T = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(&id, &decode_error(e)),
    };
    match tokio::task::spawn_blocking(move || f(req, &state)).await {
        Ok(Ok(result)) => (StatusCode::OK, Json(envelope(&id, "result", result))).into_response(),
        Ok(Err(e)) => error_response(&id, &e),
        Err(join) => error_response(
            &id,
            &ApiError::new(500, "internal", format!("handler failed: {join}")),
        ),
    }
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn score_logic(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    handle(
        state,
        headers,
        "/v1/score/logic",
        body,
        |req: api::ScoreLogicRequest, s| api::score_logic(&req, s.provider()),
    )
    .await
}

async fn score_visual(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    handle(
        state,
        headers,
        "/v1/score/visual",
        body,
        |req: api::ScoreVisualRequest, s| api::score_visual(&req, s.provider()),
    )
    .await
}

async fn render(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    handle(
        state,
        headers,
        "/v1/render",
        body,
        |req: api::RenderRequest, _| api::render_png(&req).map(|r| r.to_json()),
    )
    .await
}

async fn shape_advantages(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    handle(
        state,
        headers,
        "/v1/shape/advantages",
        body,
        |req: api::ShapeRequest, _| api::shape(&req),
    )
    .await
}

async fn not_found(headers: HeaderMap) -> Response {
    let id = request_id(&headers, "", b"");
    error_response(&id, &ApiError::new(404, "not_found", "no such endpoint"))
}

async fn method_not_allowed(headers: HeaderMap) -> Response {
    let id = request_id(&headers, "", b"");
    error_response(
        &id,
        &ApiError::new(
            405,
            "method_not_allowed",
            "method not allowed on this endpoint",
        ),
    )
}
