//! Block programs, the robot command vocabulary, the queue service and the
//! robot runtime.

pub mod affect;
pub mod auth;
pub mod autonomy;
pub mod command;
pub mod compiler;
pub mod kinematics;
pub mod perception;
pub mod queue;
pub mod runtime;
pub mod service;
pub mod store;

pub use affect::{EmotionEstimate, MirrorMap, Vad};
pub use autonomy::{AutonomyConfig, AutonomyEngine};
pub use command::{Command, CommandError, CommandList, ExpressionId, ExpressionRegistry};
pub use compiler::{BlockNode, BlockProgram, Compiler, Diagnostic, ValidationReport};
pub use kinematics::{MotionConfig, MotionPlan, Pose};
pub use perception::{PerceptionEvent, PerceptionKind};
pub use queue::{Head, QueueDocument, QueueError, QueueSnapshot, QueueSource, QueueStatus};
pub use runtime::{Mode, MotionStatus, Robot, RobotState};
pub use service::{Principal, PrincipalKind, QueueService, ServiceError};
