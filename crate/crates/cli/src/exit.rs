//! Process exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | the input was rejected (compile errors, validation, service 4xx) |
//! | 2 | bad flags, bad config, unreadable input |
//! | 3 | cannot bind the listen address |
//! | 4 | service unreachable or credentials rejected |
//! | 5 | queue busy |
//! | 6 | internal failure (storage, driver, unexpected response) |

use blockbot_server::client::ClientError;

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Usage(String),
    Bind(String),
    Unreachable(String),
    Busy(String),
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Bind(_) => 3,
            Failure::Unreachable(_) => 4,
            Failure::Busy(_) => 5,
            Failure::Internal(_) => 6,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Invalid(m)
            | Failure::Usage(m)
            | Failure::Bind(m)
            | Failure::Unreachable(m)
            | Failure::Busy(m)
            | Failure::Internal(m) => m,
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let msg = e.to_string();
        match &e {
            ClientError::Transport(_) => Failure::Unreachable(msg),
            ClientError::Api { status: 401, .. } => Failure::Unreachable(msg),
            ClientError::Api { code, .. } if code == "queue_busy" => Failure::Busy(msg),
            ClientError::Api { status, .. } if *status >= 500 => Failure::Internal(msg),
            ClientError::Api { .. } => Failure::Invalid(msg),
            ClientError::Decode(_) => Failure::Internal(msg),
        }
    }
}
