//! Typed HTTP client for the queue service API.

use std::time::Duration;

use blockbot_core::command::Command;
use blockbot_core::queue::{Head, QueueSnapshot};
use blockbot_core::runtime::RobotState;
use blockbot_core::service::RobotTelemetry;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("service unreachable: {0}")]
    Transport(String),
    #[error("{code} (HTTP {status}): {message}")]
    Api { status: u16, code: String, message: String, body: Value },
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { code, .. } => Some(code),
            _ => None,
        }
    }

    pub fn is_auth(&self) -> bool {
        matches!(self, ClientError::Api { status: 401, .. })
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SignUp {
    pub user_id: String,
    pub email: String,
    pub created_at_ms: u64,
    pub robot_key: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SignIn {
    pub token: String,
    pub user_id: String,
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct WhoAmI {
    pub user_id: String,
    pub kind: String,
}

#[derive(Debug, Clone)]
pub struct ServiceClient {
    base: String,
    http: reqwest::Client,
    token: Option<String>,
}

impl ServiceClient {
    pub fn new(base: &str) -> Self {
        ServiceClient {
            base: base.trim_end_matches('/').to_owned(),
            http: reqwest::Client::builder()
                .connect_timeout(Duration::from_secs(5))
                .build()
                .expect("http client builds"),
            token: None,
        }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn send(&self, req: reqwest::RequestBuilder, timeout: Duration) -> Result<(u16, Vec<u8>), ClientError> {
        let req = match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        };
        let resp = req.timeout(timeout).send().await.map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let bytes = resp.bytes().await.map_err(|e| ClientError::Transport(e.to_string()))?;
        if (200..300).contains(&status) {
            return Ok((status, bytes.to_vec()));
        }
        let body: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        Err(ClientError::Api {
            status,
            code: body["error"].as_str().unwrap_or("http_error").to_owned(),
            message: body["message"].as_str().unwrap_or_default().to_owned(),
            body,
        })
    }

    async fn call<T: DeserializeOwned>(&self, req: reqwest::RequestBuilder) -> Result<T, ClientError> {
        let (_, bytes) = self.send(req, Duration::from_secs(30)).await?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn healthz(&self) -> Result<Value, ClientError> {
        self.call(self.http.get(self.url("/v1/healthz"))).await
    }

    pub async fn expressions(&self) -> Result<Vec<String>, ClientError> {
        let v: Value = self.call(self.http.get(self.url("/v1/meta/expressions"))).await?;
        serde_json::from_value(v["expressions"].clone()).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn sign_up(&self, email: &str, password: &str) -> Result<SignUp, ClientError> {
        let body = json!({ "email": email, "password": password });
        self.call(self.http.post(self.url("/v1/auth/signup")).json(&body)).await
    }

    pub async fn sign_in(&self, email: &str, password: &str) -> Result<SignIn, ClientError> {
        let body = json!({ "email": email, "password": password });
        self.call(self.http.post(self.url("/v1/auth/signin")).json(&body)).await
    }

    pub async fn whoami(&self) -> Result<WhoAmI, ClientError> {
        self.call(self.http.get(self.url("/v1/auth/whoami"))).await
    }

    /// Posts a program document (`blocks` or `commands` form).
    pub async fn submit(&self, user_id: &str, doc: &Value) -> Result<QueueSnapshot, ClientError> {
        self.call(self.http.post(self.url(&format!("/v1/queue/{user_id}/program"))).json(doc)).await
    }

    pub async fn head(&self, user_id: &str, known_seq: u64, timeout: Duration) -> Result<Head, ClientError> {
        let url = self.url(&format!(
            "/v1/queue/{user_id}/head?known_seq={known_seq}&timeout_ms={}",
            timeout.as_millis()
        ));
        let (_, bytes) = self.send(self.http.get(url), timeout + Duration::from_secs(10)).await?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn ack(&self, user_id: &str, seq: u64) -> Result<QueueSnapshot, ClientError> {
        let body = json!({ "seq": seq });
        self.call(self.http.post(self.url(&format!("/v1/queue/{user_id}/ack"))).json(&body)).await
    }

    pub async fn reset(&self, user_id: &str) -> Result<QueueSnapshot, ClientError> {
        self.call(self.http.post(self.url(&format!("/v1/queue/{user_id}/reset")))).await
    }

    pub async fn direct(&self, user_id: &str, cmd: &Command) -> Result<QueueSnapshot, ClientError> {
        self.call(self.http.post(self.url(&format!("/v1/queue/{user_id}/direct"))).json(&cmd.to_wire_value()))
            .await
    }

    pub async fn queue(&self, user_id: &str) -> Result<QueueSnapshot, ClientError> {
        self.call(self.http.get(self.url(&format!("/v1/queue/{user_id}")))).await
    }

    pub async fn report_state(&self, user_id: &str, state: &RobotState) -> Result<(), ClientError> {
        let req = self.http.post(self.url(&format!("/v1/robot/{user_id}/state"))).json(state);
        self.send(req, Duration::from_secs(5)).await.map(|_| ())
    }

    pub async fn robot_state(&self, user_id: &str) -> Result<RobotTelemetry, ClientError> {
        self.call(self.http.get(self.url(&format!("/v1/robot/{user_id}/state")))).await
    }
}

/// Client for a robot's local telemetry endpoint.
#[derive(Debug, Clone)]
pub struct RobotClient {
    inner: ServiceClient,
}

impl RobotClient {
    pub fn new(base: &str) -> Self {
        let base = if base.contains("://") { base.to_owned() } else { format!("http://{base}") };
        RobotClient { inner: ServiceClient::new(&base) }
    }

    pub async fn state(&self) -> Result<RobotState, ClientError> {
        self.inner.call(self.inner.http.get(self.inner.url("/state"))).await
    }

    /// Sends JSON-lines perception records; returns how many were accepted.
    pub async fn events(&self, jsonl: String) -> Result<u64, ClientError> {
        let v: Value = self.inner.call(self.inner.http.post(self.inner.url("/events")).body(jsonl)).await?;
        Ok(v["accepted"].as_u64().unwrap_or(0))
    }

    pub async fn mode(&self, mode: blockbot_core::runtime::Mode) -> Result<(), ClientError> {
        let req = self.inner.http.post(self.inner.url("/mode")).json(&json!({ "mode": mode }));
        self.inner.send(req, Duration::from_secs(5)).await.map(|_| ())
    }
}
