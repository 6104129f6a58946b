//! Inputs shared by the benchmarks.

use blockbot_core::command::{Command, CommandList, ExpressionRegistry, STANDARD_EXPRESSIONS};
use blockbot_core::{BlockNode, BlockProgram};

/// A program of `width` leaves per level, nested `depth` repeats deep.
pub fn nested_program(depth: usize, width: usize, count: i64) -> BlockProgram {
    let leaves = |w: usize| -> Vec<BlockNode> {
        (0..w)
            .map(|i| match i % 6 {
                0 => BlockNode::MoveForward,
                1 => BlockNode::MoveLeft,
                2 => BlockNode::MoveBackward,
                3 => BlockNode::MoveRight,
                4 => BlockNode::Expression("happy".into()),
                _ => BlockNode::Stop,
            })
            .collect()
    };
    let mut body = leaves(width);
    for _ in 0..depth {
        let mut level = leaves(width);
        level.push(BlockNode::Repeat { count, body });
        body = level;
    }
    BlockProgram { blocks: body }
}

/// `n` commands cycling through every op and expression.
pub fn mixed_commands(n: usize) -> CommandList {
    let registry = ExpressionRegistry::standard();
    let commands = (0..n)
        .map(|i| match i % 7 {
            0 => Command::MoveForward,
            1 => Command::MoveBackward,
            2 => Command::TurnLeft,
            3 => Command::TurnRight,
            4 => Command::Stop,
            5 => Command::Express(registry.lookup(STANDARD_EXPRESSIONS[i % STANDARD_EXPRESSIONS.len()]).unwrap()),
            _ => Command::say(format!("step {i}")).unwrap(),
        })
        .collect();
    CommandList::new(commands).unwrap()
}
