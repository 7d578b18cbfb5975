//! HTTP + server-sent events for the chat client.
//!
//! Handlers hand blocking work (engine lock, planner calls) to the blocking
//! pool. Bodies are parsed by hand so malformed input always yields a 400
//! with a JSON detail.

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dawzy_core::engine::EngineError;
use futures::Stream;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::gateway::{Gateway, GatewayError};
use crate::host::Host;
use crate::mcp::ToolBackend;

#[derive(Clone)]
pub struct AppState {
    pub gateway: Arc<Gateway>,
    pub tools: Arc<dyn ToolBackend>,
    pub host: Arc<Host>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/chat", post(chat))
        .route("/hum", post(hum))
        .route("/state", get(get_state))
        .route("/transport", post(transport))
        .route("/undo", post(undo))
        .route("/redo", post(redo))
        .route("/events", get(events))
        .with_state(state)
}

struct ApiError(StatusCode, String, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": { "code": self.1, "message": self.2 } }))).into_response()
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, "bad_request".into(), message.into())
}

fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| bad_request(format!("malformed JSON body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal".into(), e.to_string()))
}

fn gateway_error(e: GatewayError) -> ApiError {
    match e {
        GatewayError::InvalidAudio(_) => bad_request(e.to_string()),
        GatewayError::Tool(_) => ApiError(StatusCode::INTERNAL_SERVER_ERROR, "tool_failure".into(), e.to_string()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    #[serde(default = "default_session")]
    session_id: String,
    text: String,
}

fn default_session() -> String {
    "default".into()
}

async fn chat(State(app): State<AppState>, bytes: Bytes) -> Result<Response, ApiError> {
    let req: ChatRequest = body(&bytes)?;
    let gateway = Arc::clone(&app.gateway);
    let r = blocking(move || gateway.handle_text(&req.session_id, &req.text)).await?.map_err(gateway_error)?;
    Ok(Json(r).into_response())
}

#[derive(Deserialize)]
struct HumQuery {
    #[serde(default = "default_session")]
    session_id: String,
    track_name: Option<String>,
}

async fn hum(State(app): State<AppState>, Query(q): Query<HumQuery>, bytes: Bytes) -> Result<Response, ApiError> {
    if bytes.is_empty() {
        return Err(bad_request("request body must be a WAV file"));
    }
    let gateway = Arc::clone(&app.gateway);
    let r = blocking(move || gateway.handle_hum(&q.session_id, &bytes, q.track_name.as_deref()))
        .await?
        .map_err(gateway_error)?;
    Ok(Json(r).into_response())
}

async fn get_state(State(app): State<AppState>) -> Result<Response, ApiError> {
    let host = Arc::clone(&app.host);
    let doc = blocking(move || host.state()).await?;
    Ok(Json(doc).into_response())
}

async fn transport(State(app): State<AppState>, bytes: Bytes) -> Result<Response, ApiError> {
    let args: Value = body(&bytes)?;
    let tools = Arc::clone(&app.tools);
    let r = blocking(move || tools.call("transport_control", args)).await?.map_err(|e| bad_request(e.message))?;
    Ok(Json(r.structured).into_response())
}

fn history_response(host: &Host, r: Result<u64, EngineError>) -> Result<Response, ApiError> {
    match r {
        Ok(revision) => Ok(Json(json!({ "revision": revision, "state": host.state() })).into_response()),
        Err(e @ (EngineError::NothingToUndo | EngineError::NothingToRedo)) => {
            Err(ApiError(StatusCode::CONFLICT, "nothing_to_do".into(), e.to_string()))
        }
        Err(e) => Err(ApiError(StatusCode::CONFLICT, "engine_error".into(), e.to_string())),
    }
}

async fn undo(State(app): State<AppState>) -> Result<Response, ApiError> {
    let host = Arc::clone(&app.host);
    blocking(move || history_response(&host, host.undo())).await?
}

async fn redo(State(app): State<AppState>) -> Result<Response, ApiError> {
    let host = Arc::clone(&app.host);
    blocking(move || history_response(&host, host.redo())).await?
}

async fn events(State(app): State<AppState>) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let rx = app.host.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(event) => {
                    let name = match &event {
                        crate::host::Event::StateChanged { .. } => "state_changed",
                        crate::host::Event::UiHint { .. } => "ui_hint",
                        crate::host::Event::Chat { .. } => "chat",
                    };
                    let data = serde_json::to_string(&event).unwrap_or_default();
                    return Some((Ok(SseEvent::default().event(name).data(data)), rx));
                }
                // a slow client missed events; it resyncs from GET /state
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

/// Binds and serves until ctrl-c.
pub async fn serve(state: AppState, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("http listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
