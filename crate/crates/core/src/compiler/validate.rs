use serde::Serialize;

use super::{child_path, BlockNode, BlockProgram, REPEAT_MAX, REPEAT_MIN};
use crate::command::{ExpressionRegistry, MAX_COMMANDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    UnknownExpression,
    CountOutOfRange,
    LimitExceeded,
    UnreachableAfterStop,
}

impl DiagnosticCode {
    pub fn severity(self) -> Severity {
        match self {
            DiagnosticCode::UnreachableAfterStop => Severity::Warning,
            _ => Severity::Error,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::UnknownExpression => "unknown_expression",
            DiagnosticCode::CountOutOfRange => "count_out_of_range",
            DiagnosticCode::LimitExceeded => "limit_exceeded",
            DiagnosticCode::UnreachableAfterStop => "unreachable_after_stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub code: DiagnosticCode,
    pub severity: Severity,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}: {}", self.code.as_str(), self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }
}

/// Checks a program against the shipped expression registry.
pub fn validate_program(program: &BlockProgram) -> ValidationReport {
    validate_with(program, ExpressionRegistry::standard())
}

pub(crate) fn validate_with(program: &BlockProgram, registry: &ExpressionRegistry) -> ValidationReport {
    let mut diagnostics = Vec::new();
    let size = check_nodes(&program.blocks, "", "blocks", registry, &mut diagnostics);
    if size > MAX_COMMANDS as u64 {
        diagnostics.push(Diagnostic {
            path: "blocks".into(),
            code: DiagnosticCode::LimitExceeded,
            severity: Severity::Error,
            message: format!("program expands to more than {MAX_COMMANDS} commands"),
        });
    }
    let ok = diagnostics.iter().all(|d| d.severity != Severity::Error);
    ValidationReport { ok, diagnostics }
}

/// Returns the (saturating) number of commands the sequence lowers to.
fn check_nodes(
    nodes: &[BlockNode],
    parent: &str,
    field: &str,
    registry: &ExpressionRegistry,
    out: &mut Vec<Diagnostic>,
) -> u64 {
    let mut size: u64 = 0;
    let mut after_stop = false;
    for (i, node) in nodes.iter().enumerate() {
        let path = child_path(parent, field, i);
        if after_stop {
            out.push(Diagnostic {
                path: path.clone(),
                code: DiagnosticCode::UnreachableAfterStop,
                severity: Severity::Warning,
                message: "block follows a stop; stop only halts the current motion".into(),
            });
        }
        after_stop = matches!(node, BlockNode::Stop);
        let n = match node {
            BlockNode::Expression(name) => {
                if registry.lookup(name).is_err() {
                    out.push(Diagnostic {
                        path: path.clone(),
                        code: DiagnosticCode::UnknownExpression,
                        severity: Severity::Error,
                        message: format!("`{name}` is not an available expression"),
                    });
                }
                1
            }
            BlockNode::Repeat { count, body } => {
                if !(REPEAT_MIN..=REPEAT_MAX).contains(count) {
                    out.push(Diagnostic {
                        path: path.clone(),
                        code: DiagnosticCode::CountOutOfRange,
                        severity: Severity::Error,
                        message: format!(
                            "repeat count {count} outside {REPEAT_MIN}..={REPEAT_MAX}"
                        ),
                    });
                }
                let inner = check_nodes(body, &path, "body", registry, out);
                inner.saturating_mul((*count).max(0) as u64)
            }
            _ => 1,
        };
        size = size.saturating_add(n);
    }
    size
}
