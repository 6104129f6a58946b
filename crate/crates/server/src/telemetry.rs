//! Local HTTP endpoint on the robot: live state, perception injection and
//! mode switching.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blockbot_core::affect::CategoryRegistry;
use blockbot_core::perception::parse_event_line;
use blockbot_core::runtime::{Mode, RobotState};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::{mpsc, watch};

use crate::executor::Control;

pub struct TelemetryState {
    pub state: watch::Receiver<RobotState>,
    pub control: mpsc::Sender<Control>,
    pub categories: CategoryRegistry,
}

fn reject(status: StatusCode, code: &str, message: String) -> Response {
    (status, Json(json!({ "error": code, "message": message }))).into_response()
}

async fn state(State(t): State<Arc<TelemetryState>>) -> Json<RobotState> {
    Json(t.state.borrow().clone())
}

/// Body is JSON lines, one perception record per line.
async fn events(State(t): State<Arc<TelemetryState>>, body: Bytes) -> Response {
    let Ok(text) = std::str::from_utf8(&body) else {
        return reject(StatusCode::BAD_REQUEST, "malformed_document", "body is not UTF-8".into());
    };
    let mut parsed = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_event_line(line, &t.categories, i + 1) {
            Ok(e) => parsed.push(e),
            Err(e) => return reject(StatusCode::UNPROCESSABLE_ENTITY, "invalid_event", e.to_string()),
        }
    }
    let accepted = parsed.len();
    if accepted > 0 && t.control.send(Control::Events(parsed)).await.is_err() {
        return reject(StatusCode::SERVICE_UNAVAILABLE, "robot_stopped", "executor is not running".into());
    }
    (StatusCode::ACCEPTED, Json(json!({ "accepted": accepted }))).into_response()
}

#[derive(Deserialize)]
struct ModeBody {
    mode: Mode,
}

async fn mode(State(t): State<Arc<TelemetryState>>, body: Bytes) -> Response {
    let m: ModeBody = match serde_json::from_slice(&body) {
        Ok(m) => m,
        Err(e) => return reject(StatusCode::BAD_REQUEST, "malformed_document", e.to_string()),
    };
    if t.control.send(Control::Mode(m.mode)).await.is_err() {
        return reject(StatusCode::SERVICE_UNAVAILABLE, "robot_stopped", "executor is not running".into());
    }
    (StatusCode::ACCEPTED, Json(json!({ "mode": m.mode }))).into_response()
}

pub fn router(t: Arc<TelemetryState>) -> Router {
    Router::new()
        .route("/state", get(state))
        .route("/events", post(events))
        .route("/mode", post(mode))
        .with_state(t)
}
