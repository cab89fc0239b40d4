use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Registry, ServiceError, SessionConfig, TickEvent};
use crate::kb::{serialize_knowledge_base, KbError};
use crate::reasoning::Policy;
use crate::sim::DisturbanceProfile;

/// Error body: `{"error": code, "detail": text, "clarification": text?}`.
#[derive(Debug, Serialize)]
struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: &'static str,
    detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    clarification: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        Self { status, error, detail: detail.into(), clarification: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        use StatusCode as S;
        let detail = e.to_string();
        match e {
            ServiceError::UnknownSession(_) => Self::new(S::NOT_FOUND, "unknown_session", detail),
            ServiceError::UnknownKb(_) => Self::new(S::NOT_FOUND, "unknown_kb", detail),
            ServiceError::UnknownDecision(_) => Self::new(S::NOT_FOUND, "unknown_decision", detail),
            ServiceError::UnsupportedLanguage(_) => Self {
                clarification: Some("choose one of the languages listed for the knowledge base".into()),
                ..Self::new(S::UNPROCESSABLE_ENTITY, "unsupported_language", detail)
            },
            ServiceError::InvalidOption(_) => Self::new(S::BAD_REQUEST, "invalid_option", detail),
            ServiceError::Kb(kb) => {
                let code = match kb {
                    KbError::Schema(_) => "kb_schema",
                    KbError::Integrity(_) => "kb_integrity",
                    KbError::Invalid(_) => "kb_invalid",
                    KbError::Domain(_) => "kb_domain",
                };
                Self::new(S::UNPROCESSABLE_ENTITY, code, detail)
            }
            ServiceError::Sim(_) => Self::new(S::INTERNAL_SERVER_ERROR, "simulation_error", detail),
            ServiceError::Log(_) => Self::new(S::INTERNAL_SERVER_ERROR, "log_error", detail),
        }
    }
}

fn bad_json(rejection: JsonRejection) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "bad_request", rejection.body_text())
}

type Shared = State<Arc<Registry>>;

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/kbs", post(upload_kb).get(list_kbs))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/turns", post(turn))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/decisions/{did}/explanation", get(explanation))
        .route("/sessions/{id}/ticks", get(ticks))
        .with_state(registry)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, registry: Arc<Registry>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(registry)).await
}

#[derive(Debug, Deserialize)]
struct KbQuery {
    id: Option<String>,
}

async fn upload_kb(State(reg): Shared, Query(q): Query<KbQuery>, body: String) -> Result<impl IntoResponse, ApiError> {
    let summary = reg.put_kb(q.id.as_deref(), &body)?;
    let kb = reg.kb(&summary.id)?;
    let mut value = serde_json::to_value(&summary).expect("summary serializes");
    // sampled document, so clients never evaluate membership functions themselves
    let document: Value = serde_json::from_str(&serialize_knowledge_base(&kb)).expect("serialized kb is json");
    value["document"] = document;
    Ok((StatusCode::CREATED, Json(value)))
}

async fn list_kbs(State(reg): Shared) -> impl IntoResponse {
    Json(reg.kb_summaries())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    kb: String,
    language: Option<String>,
    policy: Option<Policy>,
    theta: Option<f64>,
    disturbance: Option<DisturbanceProfile>,
}

async fn create_session(
    State(reg): Shared,
    body: Result<Json<NewSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body.map_err(bad_json)?;
    let defaults = SessionConfig::default();
    let config = SessionConfig {
        language: req.language.unwrap_or(defaults.language),
        policy: req.policy.unwrap_or(defaults.policy),
        theta: req.theta.unwrap_or(defaults.theta),
        disturbance: req.disturbance.unwrap_or(defaults.disturbance),
    };
    let id = reg.create_session(&req.kb, config)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

#[derive(Debug, Deserialize)]
struct TurnRequest {
    utterance: String,
}

async fn turn(
    State(reg): Shared,
    Path(id): Path<String>,
    body: Result<Json<TurnRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body.map_err(bad_json)?;
    Ok(Json(reg.dialog_turn(&id, &req.utterance)?))
}

async fn state(State(reg): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(reg.state(&id)?))
}

async fn explanation(
    State(reg): Shared,
    Path((id, did)): Path<(String, String)>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(reg.explanation(&id, &did)?))
}

#[derive(Debug, Deserialize)]
struct TickQuery {
    #[serde(default)]
    steps: usize,
    /// Delay between ticks in milliseconds.
    #[serde(default)]
    interval_ms: u64,
}

/// Control messages a client may send on the tick channel.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ClientMessage {
    Pause,
    Resume,
    Stop,
}

async fn ticks(
    State(reg): Shared,
    Path(id): Path<String>,
    Query(q): Query<TickQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    reg.state(&id)?;
    Ok(ws.on_upgrade(move |socket| run_ticks(socket, reg, id, q)))
}

async fn send_json(socket: &mut WebSocket, value: &impl Serialize) -> bool {
    let text = serde_json::to_string(value).expect("event serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

enum Control {
    Continue,
    Resume,
    Pause,
    Stop,
}

fn control_of(msg: Option<Result<Message, axum::Error>>) -> Control {
    match msg {
        None | Some(Err(_)) | Some(Ok(Message::Close(_))) => Control::Stop,
        Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMessage>(&text) {
            Ok(ClientMessage::Pause) => Control::Pause,
            Ok(ClientMessage::Stop) => Control::Stop,
            Ok(ClientMessage::Resume) => Control::Resume,
            Err(_) => Control::Continue,
        },
        Some(Ok(_)) => Control::Continue,
    }
}

async fn run_ticks(mut socket: WebSocket, reg: Arc<Registry>, id: String, q: TickQuery) {
    let interval = Duration::from_millis(q.interval_ms);
    let mut done = 0;
    'ticks: while done < q.steps {
        let control = tokio::select! {
            biased;
            msg = socket.recv() => control_of(msg),
            _ = tokio::time::sleep(interval) => Control::Continue,
        };
        match control {
            Control::Stop => break,
            Control::Pause => loop {
                match control_of(socket.recv().await) {
                    Control::Stop => break 'ticks,
                    Control::Resume => break,
                    Control::Pause | Control::Continue => continue,
                }
            },
            Control::Continue | Control::Resume => {}
        }
        let event = match reg.tick(&id) {
            Ok(event) => event,
            Err(e) => {
                send_json(&mut socket, &ApiError::from(e)).await;
                let _ = socket.send(Message::Close(None)).await;
                return;
            }
        };
        if !send_json(&mut socket, &event).await {
            return;
        }
        done += 1;
    }
    if let Ok(summary @ TickEvent::Summary { .. }) = reg.summary(&id, done) {
        send_json(&mut socket, &summary).await;
    }
    let _ = socket.send(Message::Close(None)).await;
}
