//! Block-program compiler.
//!
//! A block program is the tree the visual editor produces:
//! `{"blocks":[<node>...]}` where a node is
//! `{"kind":"move_forward"|"move_backward"|"move_left"|"move_right"|"stop"|"expression"|"repeat", ...}`.
//! Compilation runs in four steps: [`parse_program`] (structure only),
//! [`validate_program`] (semantic checks, errors as data),
//! [`lower_to_commands`] (flat [`CommandList`](crate::command::CommandList))
//! and [`emit_script`] (Python-syntax display script).

mod emit;
mod lower;
mod parse;
mod validate;

pub use emit::{emit_script, python_string_literal};
pub use lower::{lower_to_commands, LowerError};
pub use parse::{parse_program, program_from_value, program_to_document, ParseError};
pub use validate::{validate_program, Diagnostic, DiagnosticCode, Severity, ValidationReport};

use crate::command::ExpressionRegistry;

/// Maximum depth of block nesting; top-level blocks are at depth 1.
pub const MAX_DEPTH: usize = 16;

/// Inclusive bounds on a repeat count.
pub const REPEAT_MIN: i64 = 1;
pub const REPEAT_MAX: i64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockProgram {
    pub blocks: Vec<BlockNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockNode {
    MoveForward,
    MoveBackward,
    MoveLeft,
    MoveRight,
    Stop,
    /// Expression name as typed in the editor; resolved during validation.
    Expression(String),
    /// Count is kept as written so validation can report out-of-range values.
    Repeat { count: i64, body: Vec<BlockNode> },
}

impl BlockNode {
    pub fn kind(&self) -> &'static str {
        match self {
            BlockNode::MoveForward => "move_forward",
            BlockNode::MoveBackward => "move_backward",
            BlockNode::MoveLeft => "move_left",
            BlockNode::MoveRight => "move_right",
            BlockNode::Stop => "stop",
            BlockNode::Expression(_) => "expression",
            BlockNode::Repeat { .. } => "repeat",
        }
    }
}

impl BlockProgram {
    pub fn new(blocks: Vec<BlockNode>) -> Self {
        BlockProgram { blocks }
    }

    /// Depth of the deepest node (0 for an empty program).
    pub fn depth(&self) -> usize {
        fn depth_of(nodes: &[BlockNode]) -> usize {
            nodes
                .iter()
                .map(|n| match n {
                    BlockNode::Repeat { body, .. } => 1 + depth_of(body),
                    _ => 1,
                })
                .max()
                .unwrap_or(0)
        }
        depth_of(&self.blocks)
    }
}

/// Path of a node, rendered as `blocks[0].body[2]`.
pub(crate) fn child_path(parent: &str, field: &str, index: usize) -> String {
    if parent.is_empty() {
        format!("{field}[{index}]")
    } else {
        format!("{parent}.{field}[{index}]")
    }
}

/// Compiler bound to a specific expression registry. The free functions in
/// this module use [`ExpressionRegistry::standard`].
#[derive(Debug, Clone, Copy)]
pub struct Compiler<'r> {
    registry: &'r ExpressionRegistry,
}

impl<'r> Compiler<'r> {
    pub fn new(registry: &'r ExpressionRegistry) -> Self {
        Compiler { registry }
    }

    pub fn registry(&self) -> &'r ExpressionRegistry {
        self.registry
    }

    pub fn validate(&self, program: &BlockProgram) -> ValidationReport {
        validate::validate_with(program, self.registry)
    }

    pub fn lower(&self, program: &BlockProgram) -> Result<crate::command::CommandList, LowerError> {
        lower::lower_with(program, self.registry)
    }
}

impl Default for Compiler<'static> {
    fn default() -> Self {
        Compiler::new(ExpressionRegistry::standard())
    }
}
