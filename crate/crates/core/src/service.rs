//! The queue service: accounts, sessions, robot keys and per-user queues.
//!
//! All transitions of one user's queue run under that user's lock and are
//! written to the backend before they become visible. Different users never
//! contend on the same lock. Waiting for changes (long-poll) is left to the
//! transport layer, which is told about every committed change through the
//! [`ChangeListener`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::auth::{
    new_token, new_user_id, normalize_email, sha256_hex, Clock, HashParams, PasswordHasher,
    MAX_PASSWORD_CHARS, MIN_PASSWORD_CHARS, ROBOT_KEY_PREFIX, SESSION_PREFIX,
};
use crate::command::{Command, CommandList, ExpressionRegistry};
use crate::queue::{Head, QueueDocument, QueueError, QueueSnapshot};
use crate::runtime::RobotState;
use crate::store::{AccountRecord, Backend, StoreError};

pub const DEFAULT_SESSION_TTL_MS: u64 = 24 * 60 * 60 * 1000;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("email already registered")]
    EmailTaken,
    #[error("password must have at least {MIN_PASSWORD_CHARS} characters")]
    WeakPassword,
    #[error("email address is not valid")]
    InvalidEmail,
    #[error("invalid email or password")]
    InvalidCredentials,
    #[error("not authorized")]
    Unauthorized,
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Storage(#[from] StoreError),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::EmailTaken => "email_taken",
            ServiceError::WeakPassword => "weak_password",
            ServiceError::InvalidEmail => "invalid_email",
            ServiceError::InvalidCredentials => "invalid_credentials",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::Queue(QueueError::QueueBusy) => "queue_busy",
            ServiceError::Queue(QueueError::SequenceAhead { .. }) => "sequence_ahead",
            ServiceError::Queue(QueueError::LimitExceeded) => "limit_exceeded",
            ServiceError::Storage(_) => "storage_error",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub session_ttl_ms: u64,
    pub password_hash: HashParams,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings { session_ttl_ms: DEFAULT_SESSION_TTL_MS, password_hash: HashParams::default() }
    }
}

/// Account as shown to clients; never carries the digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountView {
    pub user_id: String,
    pub email: String,
    pub created_at_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignUpReceipt {
    pub account: AccountView,
    /// Shown once; only its hash is stored.
    pub robot_key: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionGrant {
    pub token: String,
    pub user_id: String,
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrincipalKind {
    Session,
    Robot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub user_id: String,
    pub kind: PrincipalKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotTelemetry {
    pub state: RobotState,
    pub reported_at_ms: u64,
}

/// Called with the user id after every committed queue change.
pub type ChangeListener = Arc<dyn Fn(&str) + Send + Sync>;

#[derive(Default)]
struct Accounts {
    by_email: HashMap<String, AccountRecord>,
    by_id: HashMap<String, String>,
    by_robot_key: HashMap<String, String>,
}

impl Accounts {
    fn insert(&mut self, rec: AccountRecord) {
        self.by_id.insert(rec.user_id.clone(), rec.email.clone());
        self.by_robot_key.insert(rec.robot_key_sha256.clone(), rec.user_id.clone());
        self.by_email.insert(rec.email.clone(), rec);
    }
}

struct Session {
    user_id: String,
    expires_at_ms: u64,
}

pub struct QueueService {
    backend: Arc<dyn Backend>,
    clock: Arc<dyn Clock>,
    settings: ServiceSettings,
    registry: ExpressionRegistry,
    hasher: PasswordHasher,
    // verified against when the email is unknown, so both failure paths
    // cost one hash
    decoy_digest: String,
    accounts: RwLock<Accounts>,
    sessions: Mutex<HashMap<String, Session>>,
    queues: RwLock<HashMap<String, Arc<Mutex<QueueDocument>>>>,
    telemetry: Mutex<HashMap<String, RobotTelemetry>>,
    listener: RwLock<Option<ChangeListener>>,
}

impl QueueService {
    /// Opens the service over `backend`, replaying everything it holds.
    pub fn open(
        backend: Arc<dyn Backend>,
        clock: Arc<dyn Clock>,
        settings: ServiceSettings,
        registry: ExpressionRegistry,
    ) -> Result<Self, ServiceError> {
        let hasher = PasswordHasher::new(settings.password_hash)
            .map_err(|_| ServiceError::Storage(StoreError::Corrupt {
                path: "<config>".into(),
                message: "invalid password hash parameters".into(),
            }))?;
        let loaded = backend.load()?;
        let mut accounts = Accounts::default();
        for rec in loaded.accounts {
            accounts.insert(rec);
        }
        let now = clock.now_ms();
        let mut queues: HashMap<String, Arc<Mutex<QueueDocument>>> = accounts
            .by_id
            .keys()
            .map(|id| (id.clone(), Arc::new(Mutex::new(QueueDocument::new(id.clone(), now)))))
            .collect();
        for doc in loaded.queues {
            if accounts.by_id.contains_key(&doc.user_id) {
                queues.insert(doc.user_id.clone(), Arc::new(Mutex::new(doc)));
            }
        }
        let decoy_digest = hasher.hash("decoy password for unknown accounts");
        Ok(QueueService {
            backend,
            clock,
            settings,
            registry,
            hasher,
            decoy_digest,
            accounts: RwLock::new(accounts),
            sessions: Mutex::new(HashMap::new()),
            queues: RwLock::new(queues),
            telemetry: Mutex::new(HashMap::new()),
            listener: RwLock::new(None),
        })
    }

    pub fn set_listener(&self, listener: ChangeListener) {
        *self.listener.write().unwrap() = Some(listener);
    }

    pub fn registry(&self) -> &ExpressionRegistry {
        &self.registry
    }

    pub fn settings(&self) -> &ServiceSettings {
        &self.settings
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    fn notify(&self, user_id: &str) {
        let listener = self.listener.read().unwrap().clone();
        if let Some(l) = listener {
            l(user_id);
        }
    }

    pub fn sign_up(&self, email: &str, password: &str) -> Result<SignUpReceipt, ServiceError> {
        let email = normalize_email(email).ok_or(ServiceError::InvalidEmail)?;
        let n = password.chars().count();
        if !(MIN_PASSWORD_CHARS..=MAX_PASSWORD_CHARS).contains(&n) {
            return Err(ServiceError::WeakPassword);
        }
        if self.accounts.read().unwrap().by_email.contains_key(&email) {
            return Err(ServiceError::EmailTaken);
        }
        let digest = self.hasher.hash(password);
        let robot_key = new_token(ROBOT_KEY_PREFIX);
        let rec = AccountRecord {
            user_id: new_user_id(),
            email: email.clone(),
            password_digest: digest,
            robot_key_sha256: sha256_hex(&robot_key),
            created_at_ms: self.clock.now_ms(),
        };
        let mut accounts = self.accounts.write().unwrap();
        if accounts.by_email.contains_key(&email) {
            return Err(ServiceError::EmailTaken);
        }
        self.backend.append_account(&rec)?;
        let view = AccountView {
            user_id: rec.user_id.clone(),
            email: rec.email.clone(),
            created_at_ms: rec.created_at_ms,
        };
        self.queues.write().unwrap().insert(
            rec.user_id.clone(),
            Arc::new(Mutex::new(QueueDocument::new(rec.user_id.clone(), rec.created_at_ms))),
        );
        accounts.insert(rec);
        Ok(SignUpReceipt { account: view, robot_key })
    }

    pub fn sign_in(&self, email: &str, password: &str) -> Result<SessionGrant, ServiceError> {
        let record = normalize_email(email)
            .and_then(|e| self.accounts.read().unwrap().by_email.get(&e).cloned());
        let (digest, user_id) = match &record {
            Some(r) => (r.password_digest.as_str(), Some(r.user_id.clone())),
            None => (self.decoy_digest.as_str(), None),
        };
        let verified = self.hasher.verify(password, digest);
        let user_id = match (verified, user_id) {
            (true, Some(id)) => id,
            _ => return Err(ServiceError::InvalidCredentials),
        };
        let token = new_token(SESSION_PREFIX);
        let expires_at_ms = self.clock.now_ms() + self.settings.session_ttl_ms;
        self.sessions
            .lock()
            .unwrap()
            .insert(token.clone(), Session { user_id: user_id.clone(), expires_at_ms });
        Ok(SessionGrant { token, user_id, expires_at_ms })
    }

    /// Resolves a bearer credential. Sessions slide on every successful use.
    pub fn authenticate(&self, bearer: &str) -> Result<Principal, ServiceError> {
        if bearer.starts_with(SESSION_PREFIX) {
            let now = self.clock.now_ms();
            let mut sessions = self.sessions.lock().unwrap();
            let session = sessions.get_mut(bearer).ok_or(ServiceError::Unauthorized)?;
            if now >= session.expires_at_ms {
                sessions.remove(bearer);
                return Err(ServiceError::Unauthorized);
            }
            session.expires_at_ms = now + self.settings.session_ttl_ms;
            Ok(Principal { user_id: session.user_id.clone(), kind: PrincipalKind::Session })
        } else if bearer.starts_with(ROBOT_KEY_PREFIX) {
            let accounts = self.accounts.read().unwrap();
            let user_id = accounts
                .by_robot_key
                .get(&sha256_hex(bearer))
                .ok_or(ServiceError::Unauthorized)?;
            Ok(Principal { user_id: user_id.clone(), kind: PrincipalKind::Robot })
        } else {
            Err(ServiceError::Unauthorized)
        }
    }

    pub fn account(&self, user_id: &str) -> Option<AccountView> {
        let accounts = self.accounts.read().unwrap();
        let email = accounts.by_id.get(user_id)?;
        let rec = accounts.by_email.get(email)?;
        Some(AccountView {
            user_id: rec.user_id.clone(),
            email: rec.email.clone(),
            created_at_ms: rec.created_at_ms,
        })
    }

    fn queue_for(&self, who: &Principal, user_id: &str, allowed: &[PrincipalKind]) -> Result<Arc<Mutex<QueueDocument>>, ServiceError> {
        if who.user_id != user_id || !allowed.contains(&who.kind) {
            return Err(ServiceError::Unauthorized);
        }
        self.queues.read().unwrap().get(user_id).cloned().ok_or(ServiceError::Unauthorized)
    }

    /// Applies `op` to a copy of the user's document, persists the copy if
    /// it changed, then publishes it.
    fn mutate<T>(
        &self,
        who: &Principal,
        user_id: &str,
        allowed: &[PrincipalKind],
        op: impl FnOnce(&mut QueueDocument, u64) -> Result<(T, bool), QueueError>,
    ) -> Result<(T, QueueSnapshot), ServiceError> {
        let cell = self.queue_for(who, user_id, allowed)?;
        let mut guard = cell.lock().unwrap();
        let mut next = guard.clone();
        let (out, changed) = op(&mut next, self.clock.now_ms())?;
        if changed {
            self.backend.put_queue(&next)?;
            *guard = next;
        }
        let snapshot = guard.snapshot();
        drop(guard);
        if changed {
            self.notify(user_id);
        }
        Ok((out, snapshot))
    }

    pub fn submit_program(&self, who: &Principal, user_id: &str, list: CommandList) -> Result<QueueSnapshot, ServiceError> {
        self.mutate(who, user_id, &[PrincipalKind::Session], |d, now| Ok(((), d.submit(list, now)?)))
            .map(|(_, s)| s)
    }

    /// Current head without waiting. The first poll of a pending queue
    /// marks it running.
    pub fn poll_head(&self, who: &Principal, user_id: &str) -> Result<Head, ServiceError> {
        self.mutate(who, user_id, &[PrincipalKind::Robot], |d, now| Ok(d.poll(now))).map(|(h, _)| h)
    }

    pub fn ack_head(&self, who: &Principal, user_id: &str, seq: u64) -> Result<QueueSnapshot, ServiceError> {
        self.mutate(who, user_id, &[PrincipalKind::Robot], |d, now| Ok(((), d.ack(seq, now)?)))
            .map(|(_, s)| s)
    }

    pub fn reset_queue(&self, who: &Principal, user_id: &str) -> Result<QueueSnapshot, ServiceError> {
        self.mutate(who, user_id, &[PrincipalKind::Session, PrincipalKind::Robot], |d, now| {
            Ok(((), d.reset(now)))
        })
        .map(|(_, s)| s)
    }

    pub fn direct_command(&self, who: &Principal, user_id: &str, cmd: Command) -> Result<QueueSnapshot, ServiceError> {
        self.mutate(who, user_id, &[PrincipalKind::Session], |d, now| Ok(((), d.direct(cmd, now)?)))
            .map(|(_, s)| s)
    }

    pub fn get_queue_state(&self, who: &Principal, user_id: &str) -> Result<QueueSnapshot, ServiceError> {
        let cell = self.queue_for(who, user_id, &[PrincipalKind::Session, PrincipalKind::Robot])?;
        let snapshot = cell.lock().unwrap().snapshot();
        Ok(snapshot)
    }

    pub fn report_robot_state(&self, who: &Principal, user_id: &str, state: RobotState) -> Result<(), ServiceError> {
        if who.user_id != user_id || who.kind != PrincipalKind::Robot {
            return Err(ServiceError::Unauthorized);
        }
        let t = RobotTelemetry { state, reported_at_ms: self.clock.now_ms() };
        self.telemetry.lock().unwrap().insert(user_id.to_owned(), t);
        Ok(())
    }

    pub fn robot_state(&self, who: &Principal, user_id: &str) -> Result<Option<RobotTelemetry>, ServiceError> {
        if who.user_id != user_id {
            return Err(ServiceError::Unauthorized);
        }
        Ok(self.telemetry.lock().unwrap().get(user_id).cloned())
    }
}
