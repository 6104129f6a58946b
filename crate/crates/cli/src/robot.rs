use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use blockbot_core::affect::MirrorMap;
use blockbot_core::autonomy::AutonomyEngine;
use blockbot_core::command::{encode_command, ExpressionRegistry};
use blockbot_core::kinematics::Pose;
use blockbot_core::perception::{parse_script, PerceptionEvent};
use blockbot_core::runtime::{
    Driver, ExecError, ExecutionJournal, LogSink, Mode, MotorPort, Robot, RobotState, SimDriver, StubDriver,
};
use blockbot_server::client::ServiceClient;
use blockbot_server::executor::{backoff_delay, Activity, Control, Executor, ExecutorConfig, ExecutorError};
use blockbot_server::telemetry::{self, TelemetryState};
use serde_json::json;
use tokio::sync::{mpsc, watch};

use crate::config::FileConfig;
use crate::exit::Failure;
use crate::output::Output;
use crate::serve::shutdown_signal;
use crate::{DriverKind, RobotArgs};

/// Motor port for the hardware stub: logs track speeds.
struct TraceMotorPort;

impl MotorPort for TraceMotorPort {
    fn set_tracks(&mut self, left: f64, right: f64) -> Result<(), ExecError> {
        tracing::info!(left, right, "tracks");
        Ok(())
    }
}

fn parse_pose(s: &str) -> Result<Pose, Failure> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("--pose expects x,y,heading, got `{s}`")))?;
    match parts[..] {
        [x, y, h] if parts.iter().all(|v| v.is_finite()) => Ok(Pose::new(x, y, h)),
        _ => Err(Failure::Usage(format!("--pose expects x,y,heading, got `{s}`"))),
    }
}

fn pose_text(p: &Pose) -> String {
    format!("x={} y={} heading={}", p.x, p.y, p.heading)
}

fn load_events(path: &Path, mirror: &MirrorMap) -> Result<Vec<PerceptionEvent>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_script(&text, mirror.categories()).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn replay_gap(prev: Option<u64>, at: u64, speed: f64) -> Duration {
    match prev {
        Some(p) if speed > 0.0 => Duration::from_secs_f64(at.saturating_sub(p) as f64 / 1000.0 / speed),
        _ => Duration::ZERO,
    }
}

struct Setup {
    robot: Robot,
    events: Option<Vec<PerceptionEvent>>,
}

fn build(args: &RobotArgs, file: &FileConfig) -> Result<Setup, Failure> {
    let f = &file.robot;
    let registry = ExpressionRegistry::standard();
    let driver = match (args.driver, f.driver.as_deref()) {
        (Some(d), _) => d,
        (None, None | Some("sim")) => DriverKind::Sim,
        (None, Some("stub")) => DriverKind::Stub,
        (None, Some(other)) => return Err(Failure::Usage(format!("unknown driver `{other}` in config"))),
    };
    let pose = match (&args.pose, f.pose) {
        (Some(s), _) => parse_pose(s)?,
        (None, Some([x, y, h])) => Pose::new(x, y, h),
        (None, None) => Pose::origin(),
    };
    let motion = f.motion.unwrap_or_default();
    motion.validate().map_err(|e| Failure::Usage(format!("[robot.motion] {e}")))?;
    let mirror = match args.mirror.as_ref().or(f.mirror.as_ref()) {
        Some(p) => MirrorMap::load(p, registry).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => MirrorMap::standard(),
    };
    let events = match &args.perception {
        Some(p) => Some(load_events(p, &mirror)?),
        None => None,
    };
    let realtime = !args.instant;
    let driver: Box<dyn Driver> = match driver {
        DriverKind::Sim => Box::new(SimDriver { realtime, ..SimDriver::default() }),
        DriverKind::Stub => {
            let mut d = StubDriver::new(TraceMotorPort, motion.axle_length);
            d.realtime = realtime;
            Box::new(d)
        }
    };
    // the face display and speaker are simulated on stderr
    let sink = LogSink::new(Box::new(std::io::stderr()), false);
    let autonomy = AutonomyEngine::new(f.autonomy.clone().unwrap_or_default(), mirror);
    let state = RobotState {
        mode: if args.autonomous { Mode::Autonomous } else { Mode::Command },
        ..RobotState::at(pose)
    };
    let robot = Robot::new(state, motion, driver, Box::new(sink.clone()), Box::new(sink), autonomy);
    Ok(Setup { robot, events })
}

pub async fn run(args: RobotArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    if !(args.replay_speed.is_finite() && args.replay_speed >= 0.0) {
        return Err(Failure::Usage("--replay-speed must be a non-negative number".into()));
    }
    let setup = build(&args, file)?;
    let service = args.service.clone().or_else(|| file.robot.service.clone());
    match service {
        Some(url) => online(args, file, setup, &url, out).await,
        None => offline(args, setup, out).await,
    }
}

/// No service: replay the perception script through the autonomy engine
/// and print one line per action.
async fn offline(args: RobotArgs, setup: Setup, out: &Output) -> Result<(), Failure> {
    let Some(events) = setup.events else {
        return Err(Failure::Usage("either --service or --perception is required".into()));
    };
    let mut robot = setup.robot;
    if robot.state.mode != Mode::Autonomous {
        tracing::info!("no service given; running autonomously");
        robot.set_mode(Mode::Autonomous).map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let mut prev = None;
    for e in &events {
        let gap = replay_gap(prev, e.at_ms, args.replay_speed);
        prev = Some(e.at_ms);
        if !gap.is_zero() {
            tokio::time::sleep(gap).await;
        }
        let actions = robot.autonomous_step(std::slice::from_ref(e)).map_err(|e| Failure::Internal(e.to_string()))?;
        for a in actions {
            out.record(
                &format!("{} {}", e.at_ms, encode_command(&a)),
                json!({ "t_ms": e.at_ms, "command": a.to_wire_value() }),
            );
        }
    }
    Ok(())
}

fn report(out: Output) -> impl Fn(&Activity) + Send + Sync + 'static {
    move |a| match a {
        Activity::Executed { seq, result } => out.record(
            &format!("exec seq={seq} {} {}", encode_command(&result.command), pose_text(&result.final_pose)),
            json!({
                "event": "executed",
                "seq": seq,
                "command": result.command.to_wire_value(),
                "pose": result.final_pose,
                "duration": result.duration,
            }),
        ),
        Activity::Replayed { seq } => {
            out.record(&format!("replayed seq={seq}"), json!({ "event": "replayed", "seq": seq }))
        }
        Activity::Interrupted { seq } => {
            out.record(&format!("interrupted seq={seq}"), json!({ "event": "interrupted", "seq": seq }))
        }
        Activity::Failed { seq, error } => out.record(
            &format!("failed seq={seq} {error}"),
            json!({ "event": "failed", "seq": seq, "error": error.to_string() }),
        ),
        Activity::Autonomous { command } => out.record(
            &format!("auto {}", encode_command(command)),
            json!({ "event": "autonomous", "command": command.to_wire_value() }),
        ),
        Activity::ModeChanged(m) => {
            let name = if *m == Mode::Autonomous { "autonomous" } else { "command" };
            out.record(&format!("mode {name}"), json!({ "event": "mode", "mode": m }))
        }
        Activity::Deferred { seq } => tracing::debug!(seq, "autonomous; queue head deferred"),
        Activity::Retrying { attempt, delay, error } => {
            tracing::warn!(attempt, delay_ms = delay.as_millis() as u64, "{error}")
        }
    }
}

/// Looks up the key's owner, retrying like the executor does.
async fn resolve_user(client: &ServiceClient, cfg: &ExecutorConfig) -> Result<String, Failure> {
    let mut attempt = 0;
    loop {
        match client.whoami().await {
            Ok(me) if me.kind == "robot" => return Ok(me.user_id),
            Ok(_) => return Err(Failure::Usage("--key must be a robot key, not a session token".into())),
            Err(e) => {
                attempt += 1;
                if attempt >= cfg.retry_budget {
                    let what = if e.is_auth() { "authentication rejected" } else { "service unreachable" };
                    return Err(Failure::Unreachable(format!("{what} after {attempt} attempts: {e}")));
                }
                let delay = backoff_delay(cfg.retry_base, cfg.retry_cap, attempt);
                tracing::warn!(attempt, delay_ms = delay.as_millis() as u64, "{e}");
                tokio::time::sleep(delay).await;
            }
        }
    }
}

async fn online(args: RobotArgs, file: &FileConfig, setup: Setup, url: &str, out: &Output) -> Result<(), Failure> {
    let f = &file.robot;
    let key = args
        .key
        .clone()
        .or_else(|| f.key.clone())
        .ok_or_else(|| Failure::Usage("a robot key is required (--key or BLOCKBOT_ROBOT_KEY)".into()))?;
    let journal = match args.journal.clone().or_else(|| f.journal.clone()) {
        Some(p) => open_journal(&p)?,
        None => ExecutionJournal::in_memory(),
    };
    let client = ServiceClient::new(url).with_token(key);

    let mut cfg = ExecutorConfig::new(String::new());
    if let Some(ms) = args.retry_base_ms.or(f.retry_base_ms) {
        cfg.retry_base = Duration::from_millis(ms.max(1));
    }
    if let Some(n) = args.retry_budget.or(f.retry_budget) {
        cfg.retry_budget = n.max(1);
    }
    cfg.exit_when_idle = args.until_idle;
    let default_poll = if args.until_idle { 0 } else { cfg.poll_timeout.as_millis() as u64 };
    cfg.poll_timeout = Duration::from_millis(args.poll_timeout_ms.or(f.poll_timeout_ms).unwrap_or(default_poll));
    cfg.user_id = resolve_user(&client, &cfg).await?;
    tracing::info!(user_id = cfg.user_id, driver = setup.robot.driver_name(), "robot online");

    let categories = setup.robot_categories();
    let (control_tx, control_rx) = mpsc::channel(64);
    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let executor = Executor::new(client, cfg, setup.robot, journal, control_rx, shutdown_rx.clone())
        .on_activity(Arc::new(report(*out)));
    let state = executor.state();

    let telemetry = match args.telemetry.clone().or_else(|| f.telemetry.clone()) {
        Some(addr) => {
            let listener = blockbot_server::bind(&addr)
                .await
                .map_err(|e| Failure::Bind(format!("cannot listen on {} for telemetry: {}", e.addr, e.source)))?;
            let app = telemetry::router(Arc::new(TelemetryState {
                state: state.clone(),
                control: control_tx.clone(),
                categories,
            }));
            let mut rx = shutdown_rx.clone();
            Some(tokio::spawn(blockbot_server::serve(listener, app, async move {
                let _ = rx.wait_for(|s| *s).await;
            })))
        }
        None => None,
    };

    if let Some(events) = setup.events {
        let tx = control_tx.clone();
        let speed = args.replay_speed;
        tokio::spawn(async move {
            let mut prev = None;
            for e in events {
                tokio::time::sleep(replay_gap(prev, e.at_ms, speed)).await;
                prev = Some(e.at_ms);
                if tx.send(Control::Events(vec![e])).await.is_err() {
                    return;
                }
            }
        });
    }
    drop(control_tx);

    tokio::spawn(async move {
        shutdown_signal().await;
        tracing::info!("shutting down after the current command");
        let _ = shutdown_tx.send(true);
    });

    let result = executor.run().await;
    if let Some(t) = telemetry {
        t.abort();
    }
    let summary = result.map_err(|e| match e {
        ExecutorError::Auth { .. } | ExecutorError::Unreachable { .. } => Failure::Unreachable(e.to_string()),
        ExecutorError::Journal(_) => Failure::Internal(e.to_string()),
    })?;
    let last = state.borrow().clone();
    out.record(
        &format!("final {} expression={} executed={}", pose_text(&last.pose), last.expression, summary.executed),
        json!({ "event": "final", "pose": last.pose, "expression": last.expression.as_str(), "executed": summary.executed }),
    );
    Ok(())
}

fn open_journal(p: &Path) -> Result<ExecutionJournal, Failure> {
    ExecutionJournal::open(p).map_err(|e| Failure::Usage(format!("journal {}: {e}", p.display())))
}

impl Setup {
    fn robot_categories(&self) -> blockbot_core::affect::CategoryRegistry {
        self.robot.autonomy().mirror().categories().clone()
    }
}
