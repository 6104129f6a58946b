use super::{child_path, BlockNode, BlockProgram, REPEAT_MAX, REPEAT_MIN};
use crate::command::{Command, CommandList, ExpressionRegistry, MAX_COMMANDS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LowerError {
    #[error("unknown expression `{name}` at {path}")]
    UnknownExpression { path: String, name: String },
    #[error("repeat count {count} out of range at {path}")]
    CountOutOfRange { path: String, count: i64 },
    #[error("program expands to more than {MAX_COMMANDS} commands")]
    LimitExceeded,
}

/// Lowers a validated program with the shipped expression registry.
pub fn lower_to_commands(program: &BlockProgram) -> Result<CommandList, LowerError> {
    lower_with(program, ExpressionRegistry::standard())
}

pub(crate) fn lower_with(
    program: &BlockProgram,
    registry: &ExpressionRegistry,
) -> Result<CommandList, LowerError> {
    let seq = lower_seq(&program.blocks, "", "blocks", registry)?;
    Ok(CommandList::new(seq).expect("length checked during lowering"))
}

// Each repeat body is lowered once and then replicated; the length check
// happens before any copy is made.
fn lower_seq(
    nodes: &[BlockNode],
    parent: &str,
    field: &str,
    registry: &ExpressionRegistry,
) -> Result<Vec<Command>, LowerError> {
    let mut out = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        match node {
            BlockNode::MoveForward => out.push(Command::MoveForward),
            BlockNode::MoveBackward => out.push(Command::MoveBackward),
            BlockNode::MoveLeft => out.push(Command::TurnLeft),
            BlockNode::MoveRight => out.push(Command::TurnRight),
            BlockNode::Stop => out.push(Command::Stop),
            BlockNode::Expression(name) => {
                let id = registry.lookup(name).map_err(|_| LowerError::UnknownExpression {
                    path: child_path(parent, field, i),
                    name: name.clone(),
                })?;
                out.push(Command::Express(id));
            }
            BlockNode::Repeat { count, body } => {
                let path = child_path(parent, field, i);
                if !(REPEAT_MIN..=REPEAT_MAX).contains(count) {
                    return Err(LowerError::CountOutOfRange { path, count: *count });
                }
                let once = lower_seq(body, &path, "body", registry)?;
                let total = once.len() * (*count as usize);
                if out.len() + total > MAX_COMMANDS {
                    return Err(LowerError::LimitExceeded);
                }
                out.reserve(total);
                for _ in 0..*count {
                    out.extend_from_slice(&once);
                }
            }
        }
        if out.len() > MAX_COMMANDS {
            return Err(LowerError::LimitExceeded);
        }
    }
    Ok(out)
}
