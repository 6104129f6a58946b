//! Robot-side command execution: state, drivers, output sinks.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::autonomy::AutonomyEngine;
use crate::command::{expression_from_name, Command, ExpressionId};
use crate::kinematics::{plan_motion, step_pose, tick_schedule, MotionConfig, MotionPlan, Pose};
use crate::perception::PerceptionEvent;

/// Simulator tick, seconds.
pub const DEFAULT_TICK: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Command,
    Autonomous,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MotionStatus {
    #[default]
    Idle,
    Executing { command: Command, elapsed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub expression: ExpressionId,
    pub mode: Mode,
    pub motion: MotionStatus,
}

impl Default for RobotState {
    fn default() -> Self {
        RobotState {
            pose: Pose::origin(),
            expression: expression_from_name("neutral").expect("neutral is registered"),
            mode: Mode::Command,
            motion: MotionStatus::Idle,
        }
    }
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        RobotState { pose, ..RobotState::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("driver fault: {0}")]
    DriverFault(String),
    #[error("`{0}` is not allowed in autonomous mode")]
    NotInCommandMode(&'static str),
}

/// Polled by drivers between ticks; `true` aborts the running motion.
pub trait Interrupt {
    fn interrupted(&self) -> bool;

    /// Sees the state after every tick.
    fn observe(&self, _state: &RobotState) {}
}

pub struct NoInterrupt;

impl Interrupt for NoInterrupt {
    fn interrupted(&self) -> bool {
        false
    }
}

impl Interrupt for AtomicBool {
    fn interrupted(&self) -> bool {
        self.load(Ordering::Acquire)
    }
}

impl<T: Interrupt + ?Sized> Interrupt for Arc<T> {
    fn interrupted(&self) -> bool {
        (**self).interrupted()
    }

    fn observe(&self, state: &RobotState) {
        (**self).observe(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionOutcome {
    /// Seconds of motion actually performed.
    pub elapsed: f64,
    pub interrupted: bool,
}

/// Motion backend. Drivers own the pacing of a plan and update
/// `state.pose` / `state.motion` as they go.
pub trait Driver: Send {
    fn name(&self) -> &'static str;

    fn run(
        &mut self,
        state: &mut RobotState,
        command: &Command,
        plan: &MotionPlan,
        interrupt: &dyn Interrupt,
    ) -> Result<MotionOutcome, ExecError>;

    fn halt(&mut self, state: &mut RobotState) -> Result<(), ExecError>;
}

fn tick_loop(
    state: &mut RobotState,
    command: &Command,
    plan: &MotionPlan,
    tick: f64,
    realtime: bool,
    interrupt: &dyn Interrupt,
) -> Result<MotionOutcome, ExecError> {
    let (full, rest) = tick_schedule(plan.duration, tick);
    let steps = (0..full).map(|_| tick).chain((rest > 0.0).then_some(rest));
    let start = Instant::now();
    let mut elapsed = 0.0;
    for dt in steps {
        if interrupt.interrupted() {
            state.motion = MotionStatus::Idle;
            return Ok(MotionOutcome { elapsed, interrupted: true });
        }
        state.pose = step_pose(state.pose, plan.v, plan.w, dt);
        elapsed += dt;
        state.motion = MotionStatus::Executing { command: command.clone(), elapsed };
        interrupt.observe(state);
        if realtime {
            let target = start + Duration::from_secs_f64(elapsed);
            if let Some(wait) = target.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }
    state.motion = MotionStatus::Idle;
    Ok(MotionOutcome { elapsed, interrupted: false })
}

/// Deterministic differential-drive simulator. With `realtime` off, plans
/// complete instantly in wall time.
#[derive(Debug, Clone)]
pub struct SimDriver {
    pub tick: f64,
    pub realtime: bool,
}

impl Default for SimDriver {
    fn default() -> Self {
        SimDriver { tick: DEFAULT_TICK, realtime: false }
    }
}

impl Driver for SimDriver {
    fn name(&self) -> &'static str {
        "sim"
    }

    fn run(
        &mut self,
        state: &mut RobotState,
        command: &Command,
        plan: &MotionPlan,
        interrupt: &dyn Interrupt,
    ) -> Result<MotionOutcome, ExecError> {
        tick_loop(state, command, plan, self.tick, self.realtime, interrupt)
    }

    fn halt(&mut self, state: &mut RobotState) -> Result<(), ExecError> {
        state.motion = MotionStatus::Idle;
        Ok(())
    }
}

/// Output side of a motor controller: left/right track speeds in m/s.
pub trait MotorPort: Send {
    fn set_tracks(&mut self, left: f64, right: f64) -> Result<(), ExecError>;
}

/// Motor port that records every call and can be told to fail.
#[derive(Debug, Clone, Default)]
pub struct RecordingMotorPort {
    pub calls: Arc<Mutex<Vec<(f64, f64)>>>,
    /// Fail once this many calls have succeeded.
    pub fail_after: Option<usize>,
}

impl MotorPort for RecordingMotorPort {
    fn set_tracks(&mut self, left: f64, right: f64) -> Result<(), ExecError> {
        let mut calls = self.calls.lock().unwrap();
        if self.fail_after.is_some_and(|n| calls.len() >= n) {
            return Err(ExecError::DriverFault("motor controller not responding".into()));
        }
        calls.push((left, right));
        Ok(())
    }
}

/// Hardware-adapter stand-in: converts plans to track speeds on a
/// [`MotorPort`] and dead-reckons the pose.
pub struct StubDriver<P: MotorPort> {
    pub port: P,
    pub axle_length: f64,
    pub tick: f64,
    pub realtime: bool,
}

impl<P: MotorPort> StubDriver<P> {
    pub fn new(port: P, axle_length: f64) -> Self {
        StubDriver { port, axle_length, tick: DEFAULT_TICK, realtime: false }
    }
}

impl<P: MotorPort> Driver for StubDriver<P> {
    fn name(&self) -> &'static str {
        "stub"
    }

    fn run(
        &mut self,
        state: &mut RobotState,
        command: &Command,
        plan: &MotionPlan,
        interrupt: &dyn Interrupt,
    ) -> Result<MotionOutcome, ExecError> {
        let (left, right) = plan.track_speeds(self.axle_length);
        self.port.set_tracks(left, right)?;
        let outcome = tick_loop(state, command, plan, self.tick, self.realtime, interrupt);
        self.port.set_tracks(0.0, 0.0)?;
        outcome
    }

    fn halt(&mut self, state: &mut RobotState) -> Result<(), ExecError> {
        state.motion = MotionStatus::Idle;
        self.port.set_tracks(0.0, 0.0)
    }
}

pub trait DisplaySink: Send {
    fn show(&mut self, expression: &ExpressionId);
}

pub trait SpeechSink: Send {
    fn speak(&mut self, text: &str);
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum SinkEvent {
    Express { expression: String },
    Say { text: String },
}

/// Sink that keeps everything it receives; clones share the log.
#[derive(Debug, Clone, Default)]
pub struct RecordingSink {
    pub events: Arc<Mutex<Vec<SinkEvent>>>,
}

impl RecordingSink {
    pub fn take(&self) -> Vec<SinkEvent> {
        std::mem::take(&mut *self.events.lock().unwrap())
    }

    pub fn snapshot(&self) -> Vec<SinkEvent> {
        self.events.lock().unwrap().clone()
    }
}

impl DisplaySink for RecordingSink {
    fn show(&mut self, expression: &ExpressionId) {
        self.events.lock().unwrap().push(SinkEvent::Express { expression: expression.to_string() });
    }
}

impl SpeechSink for RecordingSink {
    fn speak(&mut self, text: &str) {
        self.events.lock().unwrap().push(SinkEvent::Say { text: text.to_owned() });
    }
}

/// Writes one line per output to a shared writer (log file, stderr).
#[derive(Clone)]
pub struct LogSink {
    out: Arc<Mutex<Box<dyn Write + Send>>>,
    json: bool,
}

impl LogSink {
    pub fn new(out: Box<dyn Write + Send>, json: bool) -> Self {
        LogSink { out: Arc::new(Mutex::new(out)), json }
    }

    fn line(&self, event: SinkEvent) {
        let text = if self.json {
            serde_json::to_string(&event).expect("sink events serialize")
        } else {
            match event {
                SinkEvent::Express { expression } => format!("express {expression}"),
                SinkEvent::Say { text } => format!("say {}", serde_json::Value::String(text)),
            }
        };
        let mut out = self.out.lock().unwrap();
        let _ = writeln!(out, "{text}");
        let _ = out.flush();
    }
}

impl DisplaySink for LogSink {
    fn show(&mut self, expression: &ExpressionId) {
        self.line(SinkEvent::Express { expression: expression.to_string() });
    }
}

impl SpeechSink for LogSink {
    fn speak(&mut self, text: &str) {
        self.line(SinkEvent::Say { text: text.to_owned() });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionResult {
    pub command: Command,
    /// Motion time in seconds (simulated time for the simulator).
    pub duration: f64,
    /// Wall-clock time spent executing.
    pub wall: Duration,
    pub final_pose: Pose,
    pub interrupted: bool,
}

/// The robot: state plus the driver and sinks that act on it. One owner
/// mutates the state; everything else reads snapshots.
pub struct Robot {
    pub state: RobotState,
    pub motion: MotionConfig,
    driver: Box<dyn Driver>,
    display: Box<dyn DisplaySink>,
    speech: Box<dyn SpeechSink>,
    autonomy: AutonomyEngine,
}

impl Robot {
    pub fn new(
        state: RobotState,
        motion: MotionConfig,
        driver: Box<dyn Driver>,
        display: Box<dyn DisplaySink>,
        speech: Box<dyn SpeechSink>,
        autonomy: AutonomyEngine,
    ) -> Self {
        Robot { state, motion, driver, display, speech, autonomy }
    }

    /// Simulator robot at the origin with recording sinks.
    pub fn simulated(sink: RecordingSink) -> Self {
        Robot::new(
            RobotState::default(),
            MotionConfig::default(),
            Box::new(SimDriver::default()),
            Box::new(sink.clone()),
            Box::new(sink),
            AutonomyEngine::default(),
        )
    }

    pub fn driver_name(&self) -> &'static str {
        self.driver.name()
    }

    pub fn autonomy(&self) -> &AutonomyEngine {
        &self.autonomy
    }

    pub fn execute(&mut self, cmd: &Command) -> Result<ExecutionResult, ExecError> {
        self.execute_with(cmd, &NoInterrupt)
    }

    /// Runs one command to completion (or until `interrupt` fires).
    pub fn execute_with(
        &mut self,
        cmd: &Command,
        interrupt: &dyn Interrupt,
    ) -> Result<ExecutionResult, ExecError> {
        apply_command(
            self.driver.as_mut(),
            &mut self.state,
            cmd,
            &self.motion,
            self.display.as_mut(),
            self.speech.as_mut(),
            interrupt,
        )
    }

    /// Switching to autonomous halts any motion. Setting the current mode
    /// is a no-op.
    pub fn set_mode(&mut self, mode: Mode) -> Result<(), ExecError> {
        if self.state.mode == mode {
            return Ok(());
        }
        if mode == Mode::Autonomous {
            self.driver.halt(&mut self.state)?;
        }
        self.state.mode = mode;
        Ok(())
    }

    /// Feeds perception events to the autonomy engine and performs the
    /// resulting actions locally. Returns the actions taken.
    pub fn autonomous_step(&mut self, events: &[PerceptionEvent]) -> Result<Vec<Command>, ExecError> {
        let actions = self.autonomy.tick(&self.state, events);
        for a in &actions {
            self.execute(a)?;
        }
        Ok(actions)
    }
}

/// Executes `cmd` against a copy of `state` and returns the new state.
pub fn execute_command(
    driver: &mut dyn Driver,
    state: &RobotState,
    cmd: &Command,
    motion: &MotionConfig,
    display: &mut dyn DisplaySink,
    speech: &mut dyn SpeechSink,
) -> Result<(RobotState, ExecutionResult), ExecError> {
    let mut next = state.clone();
    let result = apply_command(driver, &mut next, cmd, motion, display, speech, &NoInterrupt)?;
    Ok((next, result))
}

fn apply_command(
    driver: &mut dyn Driver,
    state: &mut RobotState,
    cmd: &Command,
    motion: &MotionConfig,
    display: &mut dyn DisplaySink,
    speech: &mut dyn SpeechSink,
    interrupt: &dyn Interrupt,
) -> Result<ExecutionResult, ExecError> {
    let started = Instant::now();
    let (duration, interrupted) = match cmd {
        Command::Express(e) => {
            state.expression = e.clone();
            display.show(e);
            (0.0, false)
        }
        Command::Say(text) => {
            speech.speak(text);
            (0.0, false)
        }
        Command::Stop => {
            driver.halt(state)?;
            (0.0, false)
        }
        m => {
            if state.mode == Mode::Autonomous {
                return Err(ExecError::NotInCommandMode(m.op()));
            }
            let plan = plan_motion(m, motion).expect("motion command has a plan");
            let outcome = driver.run(state, m, &plan, interrupt);
            if outcome.is_err() {
                state.motion = MotionStatus::Idle;
            }
            let outcome = outcome?;
            (outcome.elapsed, outcome.interrupted)
        }
    };
    Ok(ExecutionResult {
        command: cmd.clone(),
        duration,
        wall: started.elapsed(),
        final_pose: state.pose,
        interrupted,
    })
}

/// Last queue sequence number the robot has executed. Persisted to a file
/// when given a path, so a restarted robot skips (and acks) the head it had
/// already executed before crashing.
#[derive(Debug, Clone, Default)]
pub struct ExecutionJournal {
    path: Option<PathBuf>,
    last: Option<u64>,
}

impl ExecutionJournal {
    pub fn in_memory() -> Self {
        ExecutionJournal::default()
    }

    pub fn open(path: &Path) -> std::io::Result<Self> {
        let last = match std::fs::read_to_string(path) {
            Ok(text) => text.trim().parse().ok(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e),
        };
        Ok(ExecutionJournal { path: Some(path.to_owned()), last })
    }

    pub fn last(&self) -> Option<u64> {
        self.last
    }

    pub fn is_done(&self, seq: u64) -> bool {
        self.last.is_some_and(|l| seq <= l)
    }

    pub fn record(&mut self, seq: u64) -> std::io::Result<()> {
        let seq = self.last.map_or(seq, |l| l.max(seq));
        if let Some(path) = &self.path {
            let tmp = path.with_extension("tmp");
            {
                let mut f = std::fs::File::create(&tmp)?;
                writeln!(f, "{seq}")?;
                f.sync_all()?;
            }
            std::fs::rename(&tmp, path)?;
        }
        self.last = Some(seq);
        Ok(())
    }
}
