//! Reference implementations the production code is checked against.
//! Deliberately naive: no shared helpers with the crate beyond data types.

use std::f64::consts::PI;
use std::io::Write;
use std::process::{Command as Process, Stdio};

use blockbot_core::compiler::{BlockNode, BlockProgram};
use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value};

pub const EXPRESSIONS: [&str; 11] = [
    "happy", "sad", "angry", "surprised", "afraid", "disgusted", "neutral", "love", "sleepy",
    "confused", "excited",
];

pub const COMMAND_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Commands(Vec<Value>),
    UnknownExpression,
    CountOutOfRange,
    TooLong,
}

/// Tree-walking interpreter: runs every repeat body afresh on each
/// iteration and emits wire-form commands.
pub fn interpret(program: &BlockProgram) -> Outcome {
    let mut out = Vec::new();
    match walk(&program.blocks, &mut out) {
        Ok(()) => Outcome::Commands(out),
        Err(o) => o,
    }
}

fn walk(nodes: &[BlockNode], out: &mut Vec<Value>) -> Result<(), Outcome> {
    for node in nodes {
        match node {
            BlockNode::MoveForward => out.push(json!({"op": "move_forward"})),
            BlockNode::MoveBackward => out.push(json!({"op": "move_backward"})),
            BlockNode::MoveLeft => out.push(json!({"op": "turn_left"})),
            BlockNode::MoveRight => out.push(json!({"op": "turn_right"})),
            BlockNode::Stop => out.push(json!({"op": "stop"})),
            BlockNode::Expression(name) => {
                let lower = name.to_lowercase();
                if !EXPRESSIONS.contains(&lower.as_str()) {
                    return Err(Outcome::UnknownExpression);
                }
                out.push(json!({"op": "express", "expression": lower}));
            }
            BlockNode::Repeat { count, body } => {
                if *count < 1 || *count > 1000 {
                    return Err(Outcome::CountOutOfRange);
                }
                for _ in 0..*count {
                    walk(body, out)?;
                    if out.len() > COMMAND_CAP {
                        return Err(Outcome::TooLong);
                    }
                }
            }
        }
        if out.len() > COMMAND_CAP {
            return Err(Outcome::TooLong);
        }
    }
    Ok(())
}

/// Random program with repeat nesting at most `max_nesting` levels deep
/// and counts in `1..=max_count`. About one expression in forty is unknown
/// and one repeat in a hundred has a bad count.
pub fn random_program(rng: &mut StdRng, max_nesting: usize, max_count: i64) -> BlockProgram {
    let n = rng.random_range(1..=8);
    BlockProgram::new((0..n).map(|_| random_node(rng, max_nesting, max_count)).collect())
}

fn random_node(rng: &mut StdRng, nesting_left: usize, max_count: i64) -> BlockNode {
    let roll = rng.random_range(0..100);
    if nesting_left > 0 && roll < 22 {
        let count = if rng.random_range(0..100) == 0 {
            *[0, -3, 1001].get(rng.random_range(0..3)).unwrap()
        } else {
            rng.random_range(1..=max_count)
        };
        let len = rng.random_range(0..=4);
        let body = (0..len).map(|_| random_node(rng, nesting_left - 1, max_count)).collect();
        return BlockNode::Repeat { count, body };
    }
    match roll % 6 {
        0 => BlockNode::MoveForward,
        1 => BlockNode::MoveBackward,
        2 => BlockNode::MoveLeft,
        3 => BlockNode::MoveRight,
        4 => BlockNode::Stop,
        _ => {
            if rng.random_range(0..40) == 0 {
                BlockNode::Expression("grumpy".into())
            } else {
                let name = EXPRESSIONS[rng.random_range(0..EXPRESSIONS.len())];
                if rng.random_bool(0.2) {
                    BlockNode::Expression(name.to_uppercase())
                } else {
                    BlockNode::Expression(name.into())
                }
            }
        }
    }
}

/// Explicit Euler integration of the unicycle model. Returns x, y and the
/// heading wrapped to (-π, π].
pub fn euler(x0: f64, y0: f64, th0: f64, v: f64, w: f64, t: f64, dt: f64) -> (f64, f64, f64) {
    let (mut x, mut y, mut th) = (x0, y0, th0);
    let steps = (t / dt).floor() as u64;
    let mut integrate = |h: f64| {
        x += v * th.cos() * h;
        y += v * th.sin() * h;
        th += w * h;
    };
    for _ in 0..steps {
        integrate(dt);
    }
    let rest = t - steps as f64 * dt;
    if rest > 0.0 {
        integrate(rest);
    }
    (x, y, wrap(th))
}

pub fn wrap(th: f64) -> f64 {
    let mut a = th % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn angle_gap(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

/// Index of the nearest anchor by plain Euclidean distance, lowest index
/// on ties.
pub fn brute_nearest(anchors: &[[f64; 3]], q: [f64; 3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, a) in anchors.iter().enumerate() {
        let d = ((a[0] - q[0]).powi(2) + (a[1] - q[1]).powi(2) + (a[2] - q[2]).powi(2)).sqrt();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Runs CPython's parser over `source`.
pub fn python_syntax_check(source: &str) -> Result<(), String> {
    let mut child = Process::new("python3")
        .args(["-c", "import ast, sys; ast.parse(sys.stdin.read(), '<script>')"])
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot run python3: {e}"))?;
    child.stdin.take().unwrap().write_all(source.as_bytes()).map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}
