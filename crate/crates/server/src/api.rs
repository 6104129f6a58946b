//! HTTP + JSON front end of the queue service.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blockbot_core::command::{command_list_from_value, Command, CommandError, CommandList};
use blockbot_core::compiler::{program_from_value, Compiler, Diagnostic};
use blockbot_core::queue::{Head, QueueError};
use blockbot_core::runtime::RobotState;
use blockbot_core::service::{Principal, PrincipalKind, QueueService, ServiceError};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::watch::Watchers;

/// Longest a head request may park.
pub const MAX_LONG_POLL: Duration = Duration::from_secs(30);

pub struct AppState {
    pub svc: Arc<QueueService>,
    pub watchers: Arc<Watchers>,
}

impl AppState {
    /// Wires the service's change hook to the long-poll watchers.
    pub fn new(svc: Arc<QueueService>) -> Arc<Self> {
        let watchers = Arc::new(Watchers::default());
        let w = watchers.clone();
        svc.set_listener(Arc::new(move |user| w.bump(user)));
        Arc::new(AppState { svc, watchers })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    diagnostics: Option<Vec<Diagnostic>>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), diagnostics: None }
    }

    fn malformed(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_document", message)
    }

    fn unauthorized() -> Self {
        ApiError::from(ServiceError::Unauthorized)
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::InvalidCredentials | ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::EmailTaken => StatusCode::CONFLICT,
            ServiceError::Queue(QueueError::QueueBusy | QueueError::SequenceAhead { .. }) => StatusCode::CONFLICT,
            ServiceError::WeakPassword
            | ServiceError::InvalidEmail
            | ServiceError::Queue(QueueError::LimitExceeded) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if let ServiceError::Storage(inner) = &e {
            tracing::error!(error = %inner, "storage failure");
        }
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<CommandError> for ApiError {
    fn from(e: CommandError) -> Self {
        let status = match e {
            CommandError::MalformedDocument(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(d) = self.diagnostics {
            body["diagnostics"] = serde_json::to_value(d).expect("diagnostics serialize");
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs service work off the async executor (hashing and fsync block).
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

fn principal(st: &AppState, headers: &HeaderMap) -> ApiResult<Principal> {
    let token = bearer(headers).ok_or_else(ApiError::unauthorized)?;
    Ok(st.svc.authenticate(token)?)
}

fn json_body(body: &Bytes) -> ApiResult<Value> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Credentials {
    email: String,
    password: String,
}

fn credentials(body: &Bytes) -> ApiResult<Credentials> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(e.to_string()))
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn expressions(State(st): State<Arc<AppState>>) -> Json<Value> {
    let names: Vec<&str> = st.svc.registry().iter().map(|e| e.as_str()).collect();
    Json(json!({ "expressions": names }))
}

async fn signup(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let c = credentials(&body)?;
    let svc = st.svc.clone();
    let r = blocking(move || svc.sign_up(&c.email, &c.password)).await?;
    let body = json!({
        "user_id": r.account.user_id,
        "email": r.account.email,
        "created_at_ms": r.account.created_at_ms,
        "robot_key": r.robot_key,
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn signin(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let c = credentials(&body)?;
    let svc = st.svc.clone();
    let g = blocking(move || svc.sign_in(&c.email, &c.password)).await?;
    Ok(Json(json!({ "token": g.token, "user_id": g.user_id, "expires_at_ms": g.expires_at_ms })))
}

async fn whoami(State(st): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    let p = principal(&st, &headers)?;
    let kind = match p.kind {
        PrincipalKind::Session => "session",
        PrincipalKind::Robot => "robot",
    };
    Ok(Json(json!({ "user_id": p.user_id, "kind": kind })))
}

/// Accepts `{"blocks":[...]}` (compiled here) or `{"commands":[...]}`.
fn program_list(st: &AppState, doc: &Value) -> ApiResult<(CommandList, Vec<Diagnostic>)> {
    let obj = doc.as_object().ok_or_else(|| ApiError::malformed("expected a JSON object"))?;
    match (obj.contains_key("blocks"), obj.contains_key("commands")) {
        (true, false) => {
            let program = program_from_value(doc).map_err(|e| {
                let status = match e.code() {
                    "malformed_document" => StatusCode::BAD_REQUEST,
                    _ => StatusCode::UNPROCESSABLE_ENTITY,
                };
                ApiError::new(status, e.code(), e.to_string())
            })?;
            let compiler = Compiler::new(st.svc.registry());
            let report = compiler.validate(&program);
            if !report.ok {
                let mut err = ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "validation_failed",
                    format!("{} error(s) in program", report.errors().count()),
                );
                err.diagnostics = Some(report.diagnostics);
                return Err(err);
            }
            let list = compiler.lower(&program).map_err(|e| {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", e.to_string())
            })?;
            Ok((list, report.diagnostics))
        }
        (false, true) => Ok((command_list_from_value(doc, st.svc.registry())?, Vec::new())),
        _ => Err(ApiError::malformed("expected exactly one of `blocks` or `commands`")),
    }
}

async fn submit_program(
    State(st): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let p = principal(&st, &headers)?;
    let doc = json_body(&body)?;
    let (list, warnings) = program_list(&st, &doc)?;
    let svc = st.svc.clone();
    let snap = blocking(move || svc.submit_program(&p, &user_id, list)).await?;
    let mut out = serde_json::to_value(snap).expect("snapshots serialize");
    out["warnings"] = serde_json::to_value(warnings).expect("diagnostics serialize");
    Ok(Json(out))
}

#[derive(Deserialize)]
struct HeadQuery {
    known_seq: Option<u64>,
    timeout_ms: Option<u64>,
}

/// Returns the head at once when the queue has one; otherwise parks until
/// the queue changes or the timeout passes, then answers `empty`.
async fn head(
    State(st): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    q: Result<Query<HeadQuery>, QueryRejection>,
    headers: HeaderMap,
) -> ApiResult<Json<Head>> {
    let p = principal(&st, &headers)?;
    let Query(q) = q.map_err(|e| ApiError::malformed(e.body_text()))?;
    tracing::trace!(user_id, known_seq = ?q.known_seq, "head poll");
    let wait = Duration::from_millis(q.timeout_ms.unwrap_or(0)).min(MAX_LONG_POLL);
    let deadline = tokio::time::Instant::now() + wait;
    let mut rx = st.watchers.subscribe(&user_id);
    loop {
        rx.borrow_and_update();
        let (svc, p2, uid) = (st.svc.clone(), p.clone(), user_id.clone());
        let head = blocking(move || svc.poll_head(&p2, &uid)).await?;
        if matches!(head, Head::Command { .. }) {
            return Ok(Json(head));
        }
        match tokio::time::timeout_at(deadline, rx.changed()).await {
            Ok(Ok(())) => continue,
            _ => return Ok(Json(head)),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AckBody {
    seq: u64,
}

async fn ack(
    State(st): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let p = principal(&st, &headers)?;
    let AckBody { seq } = serde_json::from_slice(&body).map_err(|e| ApiError::malformed(e.to_string()))?;
    let svc = st.svc.clone();
    let snap = blocking(move || svc.ack_head(&p, &user_id, seq)).await?;
    Ok(Json(serde_json::to_value(snap).expect("snapshots serialize")))
}

async fn reset(
    State(st): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let p = principal(&st, &headers)?;
    let svc = st.svc.clone();
    let snap = blocking(move || svc.reset_queue(&p, &user_id)).await?;
    Ok(Json(serde_json::to_value(snap).expect("snapshots serialize")))
}

async fn direct(
    State(st): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let p = principal(&st, &headers)?;
    let cmd = Command::from_value(&json_body(&body)?, st.svc.registry())?;
    let svc = st.svc.clone();
    let snap = blocking(move || svc.direct_command(&p, &user_id, cmd)).await?;
    Ok(Json(serde_json::to_value(snap).expect("snapshots serialize")))
}

async fn queue_state(
    State(st): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let p = principal(&st, &headers)?;
    let snap = st.svc.get_queue_state(&p, &user_id)?;
    Ok(Json(serde_json::to_value(snap).expect("snapshots serialize")))
}

async fn robot_state(
    State(st): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let p = principal(&st, &headers)?;
    match st.svc.robot_state(&p, &user_id)? {
        Some(t) => Ok(Json(serde_json::to_value(t).expect("telemetry serializes"))),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", "the robot has not reported yet")),
    }
}

async fn report_robot_state(
    State(st): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<StatusCode> {
    let p = principal(&st, &headers)?;
    let state: RobotState = serde_json::from_slice(&body).map_err(|e| ApiError::malformed(e.to_string()))?;
    st.svc.report_robot_state(&p, &user_id, state)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

/// The full API. With `console`, static files from that directory are
/// served for every path outside `/v1`.
pub fn router(state: Arc<AppState>, console: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/meta/expressions", get(expressions))
        .route("/v1/auth/signup", post(signup))
        .route("/v1/auth/signin", post(signin))
        .route("/v1/auth/whoami", get(whoami))
        .route("/v1/queue/{user_id}", get(queue_state))
        .route("/v1/queue/{user_id}/program", post(submit_program))
        .route("/v1/queue/{user_id}/head", get(head))
        .route("/v1/queue/{user_id}/ack", post(ack))
        .route("/v1/queue/{user_id}/reset", post(reset))
        .route("/v1/queue/{user_id}/direct", post(direct))
        .route("/v1/robot/{user_id}/state", get(robot_state).post(report_robot_state))
        .with_state(state);
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]);
    let app = match console {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    app.layer(cors)
}
