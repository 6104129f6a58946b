//! The robot's service loop: long-poll the head, execute it, journal it,
//! acknowledge it.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use blockbot_core::command::Command;
use blockbot_core::perception::PerceptionEvent;
use blockbot_core::queue::Head;
use blockbot_core::runtime::{ExecError, ExecutionJournal, ExecutionResult, Interrupt, Mode, Robot, RobotState};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;

use crate::client::{ClientError, ServiceClient};

#[derive(Debug)]
pub enum Control {
    Mode(Mode),
    Events(Vec<PerceptionEvent>),
}

#[derive(Debug, Clone)]
pub struct ExecutorConfig {
    pub user_id: String,
    /// How long the service may park an empty long-poll.
    pub poll_timeout: Duration,
    pub retry_base: Duration,
    pub retry_cap: Duration,
    /// Consecutive failed requests tolerated before giving up.
    pub retry_budget: u32,
    /// How often the queue is checked for pre-emption during motion.
    pub watch_interval: Duration,
    /// Minimum gap between state reports to the service.
    pub report_interval: Duration,
    /// Return as soon as a poll finds the queue empty.
    pub exit_when_idle: bool,
}

impl ExecutorConfig {
    pub fn new(user_id: impl Into<String>) -> Self {
        ExecutorConfig {
            user_id: user_id.into(),
            poll_timeout: Duration::from_secs(25),
            retry_base: Duration::from_millis(100),
            retry_cap: Duration::from_secs(10),
            retry_budget: 10,
            watch_interval: Duration::from_millis(100),
            report_interval: Duration::from_millis(200),
            exit_when_idle: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExecutorError {
    #[error("authentication rejected after {attempts} attempts: {last}")]
    Auth { attempts: u32, last: ClientError },
    #[error("service unreachable after {attempts} attempts: {last}")]
    Unreachable { attempts: u32, last: ClientError },
    #[error("journal: {0}")]
    Journal(#[from] std::io::Error),
}

/// Progress notifications for whoever runs the loop.
#[derive(Debug, Clone)]
pub enum Activity {
    Executed { seq: u64, result: ExecutionResult },
    Replayed { seq: u64 },
    Interrupted { seq: u64 },
    Failed { seq: u64, error: ExecError },
    Autonomous { command: Command },
    Deferred { seq: u64 },
    ModeChanged(Mode),
    Retrying { attempt: u32, delay: Duration, error: String },
}

pub type ActivityHook = Arc<dyn Fn(&Activity) + Send + Sync>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutorSummary {
    pub executed: u64,
    pub polls: u64,
}

struct MotionControl {
    stop: AtomicBool,
    publish: watch::Sender<RobotState>,
}

impl Interrupt for MotionControl {
    fn interrupted(&self) -> bool {
        self.stop.load(Ordering::Acquire)
    }

    fn observe(&self, state: &RobotState) {
        self.publish.send_replace(state.clone());
    }
}

pub struct Executor {
    client: ServiceClient,
    cfg: ExecutorConfig,
    // only ever accessed through &mut self; the mutex makes the future Sync
    robot: Mutex<Option<Robot>>,
    journal: ExecutionJournal,
    publish: watch::Sender<RobotState>,
    control: mpsc::Receiver<Control>,
    shutdown: watch::Receiver<bool>,
    hook: Option<ActivityHook>,
    pending_events: Vec<PerceptionEvent>,
    pending_mode: Option<Mode>,
    control_open: bool,
    failures: u32,
    summary: ExecutorSummary,
}

impl Executor {
    pub fn new(
        client: ServiceClient,
        cfg: ExecutorConfig,
        robot: Robot,
        journal: ExecutionJournal,
        control: mpsc::Receiver<Control>,
        shutdown: watch::Receiver<bool>,
    ) -> Self {
        let (publish, _) = watch::channel(robot.state.clone());
        Executor {
            client,
            cfg,
            robot: Mutex::new(Some(robot)),
            journal,
            publish,
            control,
            shutdown,
            hook: None,
            pending_events: Vec::new(),
            pending_mode: None,
            control_open: true,
            failures: 0,
            summary: ExecutorSummary::default(),
        }
    }

    pub fn on_activity(mut self, hook: ActivityHook) -> Self {
        self.hook = Some(hook);
        self
    }

    /// Live state, updated on every simulation tick.
    pub fn state(&self) -> watch::Receiver<RobotState> {
        self.publish.subscribe()
    }

    fn emit(&self, a: Activity) {
        if let Some(h) = &self.hook {
            h(&a);
        }
    }

    fn robot(&mut self) -> &mut Robot {
        self.robot.get_mut().unwrap().as_mut().expect("robot is home between commands")
    }

    fn stopping(&self) -> bool {
        *self.shutdown.borrow() || self.shutdown.has_changed().is_err()
    }

    pub async fn run(mut self) -> Result<ExecutorSummary, ExecutorError> {
        let reporter = self.spawn_reporter();
        let out = self.run_loop().await;
        // final state goes out even if the reporter is mid-interval
        let last = self.publish.borrow().clone();
        reporter.abort();
        let _ = self.client.report_state(&self.cfg.user_id, &last).await;
        out.map(|_| self.summary.clone())
    }

    fn spawn_reporter(&self) -> JoinHandle<()> {
        let mut rx = self.publish.subscribe();
        let client = self.client.clone();
        let user = self.cfg.user_id.clone();
        let gap = self.cfg.report_interval;
        tokio::spawn(async move {
            loop {
                let state = rx.borrow_and_update().clone();
                if let Err(e) = client.report_state(&user, &state).await {
                    tracing::debug!(error = %e, "state report failed");
                }
                tokio::time::sleep(gap).await;
                if rx.changed().await.is_err() {
                    return;
                }
            }
        })
    }

    async fn run_loop(&mut self) -> Result<(), ExecutorError> {
        let mut known_seq = 0;
        loop {
            self.drain_control();
            self.apply_pending();
            if self.stopping() {
                return Ok(());
            }
            let head = {
                let client = self.client.clone();
                let user = self.cfg.user_id.clone();
                let timeout = self.cfg.poll_timeout;
                let poll = client.head(&user, known_seq, timeout);
                tokio::pin!(poll);
                tokio::select! {
                    r = &mut poll => Some(r),
                    c = self.control.recv(), if self.control_open => {
                        self.receive(c);
                        None
                    }
                    _ = self.shutdown.changed() => None,
                }
            };
            let Some(head) = head else { continue };
            let head = match head {
                Ok(h) => {
                    self.failures = 0;
                    self.summary.polls += 1;
                    h
                }
                Err(e) => {
                    self.back_off(e).await?;
                    continue;
                }
            };
            let (seq, command) = match head {
                Head::Empty { seq_base } => {
                    if self.cfg.exit_when_idle {
                        return Ok(());
                    }
                    known_seq = seq_base.saturating_sub(1);
                    continue;
                }
                Head::Command { seq, command } => (seq, command),
            };
            known_seq = seq;
            if self.robot().state.mode == Mode::Autonomous && command != Command::Stop {
                self.emit(Activity::Deferred { seq });
                self.idle(self.cfg.poll_timeout.min(Duration::from_secs(1))).await;
                continue;
            }
            if self.journal.is_done(seq) {
                self.emit(Activity::Replayed { seq });
            } else {
                match self.perform(seq, command).await {
                    Performed::Done => {}
                    Performed::Interrupted => continue,
                }
                self.journal.record(seq)?;
            }
            self.acknowledge(seq).await?;
        }
    }

    fn drain_control(&mut self) {
        while let Ok(c) = self.control.try_recv() {
            self.stash(c);
        }
    }

    fn receive(&mut self, c: Option<Control>) {
        match c {
            Some(c) => self.stash(c),
            None => self.control_open = false,
        }
    }

    fn stash(&mut self, c: Control) {
        match c {
            Control::Mode(m) => self.pending_mode = Some(m),
            Control::Events(mut ev) => self.pending_events.append(&mut ev),
        }
    }

    fn apply_pending(&mut self) {
        if let Some(mode) = self.pending_mode.take() {
            if self.robot().state.mode != mode {
                match self.robot().set_mode(mode) {
                    Ok(()) => self.emit(Activity::ModeChanged(mode)),
                    Err(e) => tracing::warn!(error = %e, "mode change failed"),
                }
            }
        }
        if !self.pending_events.is_empty() {
            let events = std::mem::take(&mut self.pending_events);
            match self.robot().autonomous_step(&events) {
                Ok(actions) => {
                    for command in actions {
                        self.emit(Activity::Autonomous { command });
                    }
                }
                Err(e) => tracing::warn!(error = %e, "autonomous step failed"),
            }
        }
        let state = self.robot().state.clone();
        self.publish.send_if_modified(|s| {
            let changed = *s != state;
            *s = state;
            changed
        });
    }

    /// Waits for `limit`, a control message or shutdown, whichever is first.
    async fn idle(&mut self, limit: Duration) {
        tokio::select! {
            _ = tokio::time::sleep(limit) => {}
            c = self.control.recv(), if self.control_open => self.receive(c),
            _ = self.shutdown.changed() => {}
        }
    }

    async fn perform(&mut self, seq: u64, command: Command) -> Performed {
        let ctl = Arc::new(MotionControl { stop: AtomicBool::new(false), publish: self.publish.clone() });
        let mut robot = self.robot.get_mut().unwrap().take().expect("robot is home between commands");
        let task = {
            let ctl = ctl.clone();
            let command = command.clone();
            tokio::task::spawn_blocking(move || {
                let r = robot.execute_with(&command, &ctl);
                (robot, r)
            })
        };
        tokio::pin!(task);
        let mut ticker = tokio::time::interval(self.cfg.watch_interval);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        ticker.tick().await;
        let (robot, result) = loop {
            tokio::select! {
                joined = &mut task => break joined.expect("executor task panicked"),
                c = self.control.recv(), if self.control_open => {
                    if matches!(c, Some(Control::Mode(Mode::Autonomous))) {
                        ctl.stop.store(true, Ordering::Release);
                    }
                    self.receive(c);
                }
                _ = ticker.tick(), if command.is_motion() => {
                    if self.superseded(seq).await {
                        ctl.stop.store(true, Ordering::Release);
                    }
                }
            }
        };
        *self.robot.get_mut().unwrap() = Some(robot);
        let state = self.robot().state.clone();
        self.publish.send_replace(state);
        match result {
            Ok(r) if r.interrupted => {
                self.emit(Activity::Interrupted { seq });
                self.apply_pending();
                Performed::Interrupted
            }
            Ok(result) => {
                self.summary.executed += 1;
                self.emit(Activity::Executed { seq, result });
                Performed::Done
            }
            Err(error) => {
                // a command the robot cannot perform is consumed, not retried forever
                tracing::warn!(seq, error = %error, "command failed");
                self.emit(Activity::Failed { seq, error });
                Performed::Done
            }
        }
    }

    /// True once `seq` is no longer the head: a stop or reset replaced it.
    async fn superseded(&self, seq: u64) -> bool {
        match self.client.queue(&self.cfg.user_id).await {
            Ok(snap) => snap.seq_base > seq,
            Err(_) => false,
        }
    }

    async fn acknowledge(&mut self, seq: u64) -> Result<(), ExecutorError> {
        loop {
            match self.client.ack(&self.cfg.user_id, seq).await {
                Ok(_) => {
                    self.failures = 0;
                    return Ok(());
                }
                Err(e) if e.code() == Some("sequence_ahead") => {
                    tracing::warn!(seq, "service has not issued this sequence; dropping ack");
                    return Ok(());
                }
                Err(e) => self.back_off(e).await?,
            }
        }
    }

    async fn back_off(&mut self, error: ClientError) -> Result<(), ExecutorError> {
        self.failures += 1;
        if self.failures >= self.cfg.retry_budget {
            let attempts = self.failures;
            return Err(if error.is_auth() {
                ExecutorError::Auth { attempts, last: error }
            } else {
                ExecutorError::Unreachable { attempts, last: error }
            });
        }
        let delay = backoff_delay(self.cfg.retry_base, self.cfg.retry_cap, self.failures);
        self.emit(Activity::Retrying { attempt: self.failures, delay, error: error.to_string() });
        tokio::select! {
            _ = tokio::time::sleep(delay) => {}
            _ = self.shutdown.changed() => {}
        }
        Ok(())
    }
}

enum Performed {
    Done,
    Interrupted,
}

/// Exponential delay after the `attempt`-th consecutive failure.
pub fn backoff_delay(base: Duration, cap: Duration, attempt: u32) -> Duration {
    let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
    base.saturating_mul(factor).min(cap)
}
