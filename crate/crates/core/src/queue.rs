//! Per-user command queue document and its state machine.
//!
//! A submitted list becomes the queue. The robot polls the head, executes
//! it, then acks the head's sequence number; the head is dropped and the
//! next element becomes the head. Sequence numbers never go backwards, so a
//! duplicated or late ack is recognised and ignored.

use serde::{Deserialize, Serialize};

use crate::command::{Command, CommandList, MAX_COMMANDS};

/// Sequence number given to the first command a user ever submits.
pub const INITIAL_SEQ: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueStatus {
    Idle,
    Pending,
    Running,
}

impl QueueStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QueueStatus::Idle => "idle",
            QueueStatus::Pending => "pending",
            QueueStatus::Running => "running",
        }
    }
}

/// What filled the queue: a compiled program or teleoperation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueSource {
    Program,
    Teleop,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueueError {
    #[error("queue is busy")]
    QueueBusy,
    #[error("sequence {seq} is ahead of the queue head {seq_base}")]
    SequenceAhead { seq: u64, seq_base: u64 },
    #[error("queue would exceed {MAX_COMMANDS} commands")]
    LimitExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueDocument {
    pub user_id: String,
    /// Sequence number of the current head (or of the next command, when
    /// the queue is empty).
    pub seq_base: u64,
    pub commands: Vec<Command>,
    pub status: QueueStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<QueueSource>,
    pub updated_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Head {
    Command { seq: u64, command: Command },
    Empty { seq_base: u64 },
}

/// Read-only view returned by every queue operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueSnapshot {
    pub user_id: String,
    pub seq_base: u64,
    pub remaining: usize,
    pub status: QueueStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<QueueSource>,
    pub commands: Vec<Command>,
    pub updated_at_ms: u64,
}

impl QueueDocument {
    pub fn new(user_id: impl Into<String>, now_ms: u64) -> Self {
        QueueDocument {
            user_id: user_id.into(),
            seq_base: INITIAL_SEQ,
            commands: Vec::new(),
            status: QueueStatus::Idle,
            source: None,
            updated_at_ms: now_ms,
        }
    }

    pub fn snapshot(&self) -> QueueSnapshot {
        QueueSnapshot {
            user_id: self.user_id.clone(),
            seq_base: self.seq_base,
            remaining: self.commands.len(),
            status: self.status,
            source: self.source,
            commands: self.commands.clone(),
            updated_at_ms: self.updated_at_ms,
        }
    }

    pub fn head(&self) -> Head {
        match self.commands.first() {
            Some(c) => Head::Command { seq: self.seq_base, command: c.clone() },
            None => Head::Empty { seq_base: self.seq_base },
        }
    }

    /// Status/emptiness agreement and the command cap.
    pub fn check_invariants(&self) -> Result<(), String> {
        if (self.status == QueueStatus::Idle) != self.commands.is_empty() {
            return Err(format!(
                "status {:?} with {} commands",
                self.status,
                self.commands.len()
            ));
        }
        if self.commands.len() > MAX_COMMANDS {
            return Err("over the command cap".into());
        }
        if self.status == QueueStatus::Idle && self.source.is_some() {
            return Err("idle queue with a source".into());
        }
        Ok(())
    }

    fn clear(&mut self) {
        self.seq_base += self.commands.len() as u64;
        self.commands.clear();
        self.status = QueueStatus::Idle;
        self.source = None;
    }

    /// Stores a program. Empty lists are accepted without change.
    /// Returns whether the document changed.
    pub fn submit(&mut self, list: CommandList, now_ms: u64) -> Result<bool, QueueError> {
        if self.status != QueueStatus::Idle {
            return Err(QueueError::QueueBusy);
        }
        if list.is_empty() {
            return Ok(false);
        }
        self.commands = list.into_vec();
        self.status = QueueStatus::Pending;
        self.source = Some(QueueSource::Program);
        self.updated_at_ms = now_ms;
        Ok(true)
    }

    /// Current head; the first poll of a pending queue marks it running.
    pub fn poll(&mut self, now_ms: u64) -> (Head, bool) {
        let changed = if self.status == QueueStatus::Pending {
            self.status = QueueStatus::Running;
            self.updated_at_ms = now_ms;
            true
        } else {
            false
        };
        (self.head(), changed)
    }

    /// Drops the head if `seq` names it. Stale sequence numbers succeed
    /// without effect.
    pub fn ack(&mut self, seq: u64, now_ms: u64) -> Result<bool, QueueError> {
        if seq < self.seq_base {
            return Ok(false);
        }
        if seq > self.seq_base || self.commands.is_empty() {
            return Err(QueueError::SequenceAhead { seq, seq_base: self.seq_base });
        }
        self.commands.remove(0);
        self.seq_base += 1;
        if self.commands.is_empty() {
            self.status = QueueStatus::Idle;
            self.source = None;
        }
        self.updated_at_ms = now_ms;
        Ok(true)
    }

    /// Clears the queue; cleared sequence numbers are never reused.
    pub fn reset(&mut self, now_ms: u64) -> bool {
        if self.commands.is_empty() && self.status == QueueStatus::Idle {
            return false;
        }
        self.clear();
        self.updated_at_ms = now_ms;
        true
    }

    /// Teleop. Moves append while no program is queued; `Stop` clears
    /// whatever is queued and leaves a single `Stop`.
    pub fn direct(&mut self, cmd: Command, now_ms: u64) -> Result<bool, QueueError> {
        if cmd == Command::Stop {
            self.clear();
            self.commands.push(Command::Stop);
        } else {
            if self.status != QueueStatus::Idle && self.source != Some(QueueSource::Teleop) {
                return Err(QueueError::QueueBusy);
            }
            if self.commands.len() >= MAX_COMMANDS {
                return Err(QueueError::LimitExceeded);
            }
            self.commands.push(cmd);
        }
        if self.status == QueueStatus::Idle {
            self.status = QueueStatus::Pending;
        }
        self.source = Some(QueueSource::Teleop);
        self.updated_at_ms = now_ms;
        Ok(true)
    }
}
