//! Whole-criterion checks shared by the integration tests and the
//! acceptance runner. Each returns a one-line summary or the first failure.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::sync::Arc;

use blockbot_core::affect::{MirrorMap, Vad, STANDARD_CATEGORIES};
use blockbot_core::auth::{HashParams, ManualClock};
use blockbot_core::command::{encode_command, Command, CommandList, ExpressionRegistry};
use blockbot_core::compiler::{lower_to_commands, program_to_document, BlockProgram, LowerError};
use blockbot_core::kinematics::{step_pose, MotionPlan, Pose};
use blockbot_core::perception::parse_script;
use blockbot_core::queue::{Head, QueueStatus};
use blockbot_core::runtime::{Driver, NoInterrupt, RecordingSink, Robot, RobotState, SimDriver};
use blockbot_core::service::{QueueService, ServiceSettings};
use blockbot_core::store::MemoryBackend;
use blockbot_core::{AutonomyConfig, AutonomyEngine, EmotionEstimate};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::faults::{self, FaultRates};
use super::golden;
use super::oracles::{self, angle_gap, brute_nearest, euler, interpret, random_program, Outcome};

pub type Check = Result<String, String>;

pub const POSITION_TOL: f64 = 1e-4;
pub const HEADING_TOL: f64 = 1e-6;
pub const EXACT_TOL: f64 = 1e-9;
pub const EULER_DT: f64 = 1e-5;
pub const E2E_TOL: f64 = 1e-6;

fn production(program: &BlockProgram) -> Outcome {
    match lower_to_commands(program) {
        Ok(list) => Outcome::Commands(list.iter().map(|c| c.to_wire_value()).collect()),
        Err(LowerError::UnknownExpression { .. }) => Outcome::UnknownExpression,
        Err(LowerError::CountOutOfRange { .. }) => Outcome::CountOutOfRange,
        Err(LowerError::LimitExceeded) => Outcome::TooLong,
    }
}

pub fn compiler_oracle(programs: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut commands = 0;
    for i in 0..programs {
        let program = random_program(&mut rng, 4, 10);
        let expected = interpret(&program);
        if production(&program) != expected {
            return Err(format!("program #{i} differs: {}", program_to_document(&program)));
        }
        if let Outcome::Commands(c) = expected {
            commands += c.len();
        }
    }
    Ok(format!("{programs} programs, {commands} commands"))
}

pub fn golden_corpus(dir: &Path) -> Check {
    let cases = golden::corpus(dir);
    if cases.len() < 10 {
        return Err(format!("only {} golden programs", cases.len()));
    }
    for case in &cases {
        golden::check(case)?;
    }
    Ok(format!("{} programs byte-exact", cases.len()))
}

pub fn script_emission(dir: &Path) -> Check {
    let cases = golden::corpus(dir);
    for case in &cases {
        let produced = golden::produce(case)?;
        oracles::python_syntax_check(&produced.script).map_err(|e| format!("{}: {e}", case.name))?;
        let lines = produced.script.lines().count();
        if lines != produced.command_count {
            return Err(format!("{}: {lines} lines for {} commands", case.name, produced.command_count));
        }
    }
    Ok(format!("{} scripts parse, one line per command", cases.len()))
}

pub fn kinematics(plans: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut worst_pos, mut worst_th) = (0.0f64, 0.0f64);
    for i in 0..plans {
        let start = Pose::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-PI..PI));
        let v = rng.random_range(-0.5..0.5);
        let w = rng.random_range(-3.0..3.0);
        let t = rng.random_range(0.01..4.0);
        let (ex, ey, eth) = euler(start.x, start.y, start.heading, v, w, t, EULER_DT);

        // whole segment in one closed-form step, and through the ticking simulator
        let one = step_pose(start, v, w, t);
        let mut state = RobotState::at(start);
        SimDriver::default()
            .run(&mut state, &Command::MoveForward, &MotionPlan { v, w, duration: t }, &NoInterrupt)
            .map_err(|e| e.to_string())?;
        for p in [one, state.pose] {
            let dp = (p.x - ex).hypot(p.y - ey);
            let dth = angle_gap(p.heading, eth);
            worst_pos = worst_pos.max(dp);
            worst_th = worst_th.max(dth);
            if dp > POSITION_TOL || dth > HEADING_TOL {
                return Err(format!("plan #{i} (v={v}, w={w}, t={t}): off by {dp:e} m, {dth:e} rad"));
            }
        }
    }

    let start = Pose::new(0.3, -0.2, 0.4);
    for w in [FRAC_PI_2 / 1.5, -1.0, 2.5] {
        let p = step_pose(start, 0.0, w, 1.5);
        let want = oracles::wrap(0.4 + w * 1.5);
        if (p.x - start.x).abs() > EXACT_TOL || (p.y - start.y).abs() > EXACT_TOL || angle_gap(p.heading, want) > EXACT_TOL {
            return Err(format!("pure rotation w={w} moved to {p:?}"));
        }
    }
    for v in [0.1, -0.1, 0.37] {
        let p = step_pose(start, v, 0.0, 2.5);
        let (wx, wy) = (start.x + v * 2.5 * 0.4f64.cos(), start.y + v * 2.5 * 0.4f64.sin());
        if (p.x - wx).abs() > EXACT_TOL || (p.y - wy).abs() > EXACT_TOL || angle_gap(p.heading, 0.4) > EXACT_TOL {
            return Err(format!("straight line v={v} ended at {p:?}"));
        }
    }
    Ok(format!("{plans} plans, worst {worst_pos:.1e} m / {worst_th:.1e} rad"))
}

/// The reference program drained through the service by a simulated robot.
pub fn end_to_end_sim() -> Check {
    let clock = ManualClock::new(0);
    let svc = QueueService::open(
        Arc::new(MemoryBackend::new()),
        Arc::new(clock),
        ServiceSettings { password_hash: HashParams::light(), ..ServiceSettings::default() },
        ExpressionRegistry::default(),
    )
    .map_err(|e| e.to_string())?;
    let receipt = svc.sign_up("e2e@example.org", "password1").map_err(|e| e.to_string())?;
    let uid = receipt.account.user_id;
    let user = svc.authenticate(&svc.sign_in("e2e@example.org", "password1").unwrap().token).unwrap();
    let robot_p = svc.authenticate(&receipt.robot_key).unwrap();
    let happy = ExpressionRegistry::standard().lookup("happy").unwrap();
    let program = vec![Command::MoveForward, Command::TurnLeft, Command::MoveForward, Command::Express(happy.clone()), Command::Stop];
    svc.submit_program(&user, &uid, CommandList::new(program).unwrap()).map_err(|e| e.to_string())?;

    let mut robot = Robot::simulated(RecordingSink::default());
    while let Head::Command { seq, command } = svc.poll_head(&robot_p, &uid).map_err(|e| e.to_string())? {
        robot.execute(&command).map_err(|e| e.to_string())?;
        svc.ack_head(&robot_p, &uid, seq).map_err(|e| e.to_string())?;
    }
    end_state_matches(&robot.state, svc.get_queue_state(&user, &uid).unwrap().status)
}

pub fn end_state_matches(state: &RobotState, status: QueueStatus) -> Check {
    let p = state.pose;
    let err = (p.x - 0.25).abs().max((p.y - 0.25).abs()).max(angle_gap(p.heading, FRAC_PI_2));
    if err > E2E_TOL {
        return Err(format!("ended at ({}, {}, {}), off by {err:e}", p.x, p.y, p.heading));
    }
    if state.expression.as_str() != "happy" {
        return Err(format!("expression is {}", state.expression));
    }
    if status != QueueStatus::Idle {
        return Err(format!("queue is {}", status.as_str()));
    }
    Ok(format!("pose within {err:.1e}, happy, queue idle"))
}

fn unit(rng: &mut StdRng) -> Vad {
    Vad::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0))
}

pub fn mirroring(queries: usize, seed: u64) -> Check {
    let map = MirrorMap::standard();
    let registry = ExpressionRegistry::standard();
    let mut rng = StdRng::seed_from_u64(seed);

    for cat in STANDARD_CATEGORIES {
        if map.table_entry(cat).is_none() {
            return Err(format!("category {cat} has no table entry"));
        }
        let e = EmotionEstimate::new(cat, unit(&mut rng), map.categories()).map_err(|e| e.to_string())?;
        for m in [&map, &map.without_table()] {
            if !registry.contains(&m.map_emotion_to_expression(&e)) {
                return Err(format!("category {cat} maps outside the registry"));
            }
        }
    }

    let anchors: Vec<[f64; 3]> = map.anchors().iter().map(|(_, v)| [v.valence, v.arousal, v.dominance]).collect();
    let names: Vec<&str> = map.anchors().iter().map(|(id, _)| id.as_str()).collect();
    let no_table = map.without_table();
    for i in 0..queries {
        let q = unit(&mut rng);
        let want = names[brute_nearest(&anchors, [q.valence, q.arousal, q.dominance])];
        let got = map.nearest_anchor(&q).as_str();
        if got != want {
            return Err(format!("query #{i} {q:?}: got {got}, brute force says {want}"));
        }
        let cat = STANDARD_CATEGORIES[i % STANDARD_CATEGORIES.len()];
        let e = EmotionEstimate::new(cat, q, map.categories()).unwrap();
        if no_table.map_emotion_to_expression(&e).as_str() != want {
            return Err(format!("query #{i}: table-free mapping disagrees"));
        }
    }

    let mut scalings = 0;
    for i in 0..queries {
        let q = unit(&mut rng);
        let k = 10f64.powf(rng.random_range(-3.0..3.0));
        let base = map.nearest_anchor(&q).clone();
        let scaled = map.with_scaled_anchors(k);
        if scaled.nearest_anchor(&q.scaled(k)) != &base {
            return Err(format!("query #{i}: scaling by {k} changed the expression"));
        }
        scalings += 1;
    }
    Ok(format!("26 categories total, {queries} brute-force queries, {scalings} scalings"))
}

pub fn format_actions(actions: &[(u64, Command)]) -> String {
    actions.iter().map(|(t, c)| format!("{t} {}\n", encode_command(c))).collect()
}

pub fn autonomy(fixtures: &Path) -> Check {
    let text = std::fs::read_to_string(fixtures.join("perception.jsonl")).map_err(|e| e.to_string())?;
    let map = MirrorMap::standard();
    let events = parse_script(&text, map.categories()).map_err(|e| e.to_string())?;
    let emotions = events
        .iter()
        .filter(|e| matches!(e.kind, blockbot_core::PerceptionKind::EmotionDetected(_)))
        .count();
    for (mirror, golden) in [(map.clone(), "autonomy_table.log"), (map.without_table(), "autonomy_nearest.log")] {
        let actions = AutonomyEngine::new(AutonomyConfig::default(), mirror).replay(&events);
        let expresses = actions.iter().filter(|(_, c)| matches!(c, Command::Express(_))).count();
        if expresses != emotions {
            return Err(format!("{expresses} expressions for {emotions} emotion events"));
        }
        let mut greeted: Vec<(String, u64)> = Vec::new();
        for (t, c) in &actions {
            if let Command::Say(text) = c {
                if let Some((_, last)) = greeted.iter().rev().find(|(s, _)| s == text) {
                    if t - last < 30_000 {
                        return Err(format!("`{text}` repeated within 30 s at {t}"));
                    }
                }
                greeted.push((text.clone(), *t));
            }
        }
        let want = std::fs::read_to_string(fixtures.join(golden)).map_err(|e| e.to_string())?;
        if format_actions(&actions) != want {
            return Err(format!("action log differs from {golden}"));
        }
    }
    Ok(format!("{} events, {emotions} expressions, logs match", events.len()))
}

pub fn exactly_once(programs: usize, seed: u64, journal_dir: &Path) -> Check {
    let started = std::time::Instant::now();
    let r = faults::run(seed, programs, 100, FaultRates::heavy(), journal_dir)?;
    Ok(format!(
        "{} programs / {} commands; {} robot and {} service restarts, {} failed writes, {} duplicate acks, {} duplicate polls; {:.1}s",
        r.programs,
        r.commands,
        r.robot_restarts,
        r.service_restarts,
        r.storage_failures,
        r.duplicate_acks,
        r.duplicate_polls,
        started.elapsed().as_secs_f64()
    ))
}
