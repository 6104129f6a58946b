//! Unicycle-model kinematics for the two-track base.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::command::Command;

/// Below this angular speed a step is integrated as a straight line.
pub const STRAIGHT_EPSILON: f64 = 1e-9;

/// Wraps an angle into (-π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let a = (theta + PI).rem_euclid(TAU) - PI;
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians, counterclockwise from +x, in (-π, π].
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading: normalize_angle(heading) }
    }

    pub fn origin() -> Self {
        Pose::default()
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    /// m/s
    pub linear_speed: f64,
    /// Distance of one forward/backward step, m.
    pub cell_distance: f64,
    /// Rotation of one left/right step, rad.
    pub turn_angle: f64,
    /// Time a left/right step takes, s.
    pub turn_duration: f64,
    /// Track separation, m. Used to split (v, w) into per-track speeds.
    pub axle_length: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            linear_speed: 0.1,
            cell_distance: 0.25,
            turn_angle: FRAC_PI_2,
            turn_duration: 1.5,
            axle_length: 0.14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("motion config field `{0}` must be finite and strictly positive")]
pub struct InvalidMotionConfig(pub &'static str);

impl MotionConfig {
    pub fn validate(&self) -> Result<(), InvalidMotionConfig> {
        let fields = [
            ("linear_speed", self.linear_speed),
            ("cell_distance", self.cell_distance),
            ("turn_angle", self.turn_angle),
            ("turn_duration", self.turn_duration),
            ("axle_length", self.axle_length),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(InvalidMotionConfig(name));
            }
        }
        Ok(())
    }
}

/// Constant-velocity segment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionPlan {
    /// Signed linear speed, m/s.
    pub v: f64,
    /// Signed angular speed, rad/s.
    pub w: f64,
    /// Seconds.
    pub duration: f64,
}

impl MotionPlan {
    pub fn stop() -> Self {
        MotionPlan::default()
    }

    /// Left and right track speeds for a differential base, m/s.
    pub fn track_speeds(&self, axle_length: f64) -> (f64, f64) {
        let half = self.w * axle_length / 2.0;
        (self.v - half, self.v + half)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` is not a motion command")]
pub struct NotAMotionCommand(pub &'static str);

pub fn plan_motion(cmd: &Command, cfg: &MotionConfig) -> Result<MotionPlan, NotAMotionCommand> {
    let straight = cfg.cell_distance / cfg.linear_speed;
    let spin = cfg.turn_angle / cfg.turn_duration;
    Ok(match cmd {
        Command::MoveForward => MotionPlan { v: cfg.linear_speed, w: 0.0, duration: straight },
        Command::MoveBackward => MotionPlan { v: -cfg.linear_speed, w: 0.0, duration: straight },
        Command::TurnLeft => MotionPlan { v: 0.0, w: spin, duration: cfg.turn_duration },
        Command::TurnRight => MotionPlan { v: 0.0, w: -spin, duration: cfg.turn_duration },
        Command::Stop => MotionPlan::stop(),
        Command::Express(_) | Command::Say(_) => return Err(NotAMotionCommand(cmd.op())),
    })
}

/// Advances `pose` by `dt` seconds at constant (v, w), integrating the arc
/// in closed form.
pub fn step_pose(pose: Pose, v: f64, w: f64, dt: f64) -> Pose {
    let th = pose.heading;
    let (x, y) = if w.abs() < STRAIGHT_EPSILON {
        (pose.x + v * dt * th.cos(), pose.y + v * dt * th.sin())
    } else {
        let r = v / w;
        let th1 = th + w * dt;
        (pose.x + r * (th1.sin() - th.sin()), pose.y - r * (th1.cos() - th.cos()))
    };
    Pose { x, y, heading: normalize_angle(th + w * dt) }
}

/// Number of whole ticks and the trailing partial tick for a segment.
pub fn tick_schedule(duration: f64, tick: f64) -> (u64, f64) {
    if duration <= 0.0 {
        return (0, 0.0);
    }
    let full = (duration / tick + 1e-9).floor();
    let rest = duration - full * tick;
    (full as u64, if rest > 1e-12 { rest } else { 0.0 })
}
