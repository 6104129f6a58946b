use serde_json::{Map, Value};

use super::{child_path, BlockNode, BlockProgram, MAX_DEPTH};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed document at {path}: {message}")]
    MalformedDocument { path: String, message: String },
    #[error("unknown block kind `{kind}` at {path}")]
    UnknownBlockKind { path: String, kind: String },
    #[error("nesting deeper than {MAX_DEPTH} at {path}")]
    DepthExceeded { path: String },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::MalformedDocument { .. } => "malformed_document",
            ParseError::UnknownBlockKind { .. } => "unknown_block_kind",
            ParseError::DepthExceeded { .. } => "depth_exceeded",
        }
    }

    pub fn path(&self) -> &str {
        match self {
            ParseError::MalformedDocument { path, .. }
            | ParseError::UnknownBlockKind { path, .. }
            | ParseError::DepthExceeded { path } => path,
        }
    }
}

fn malformed(path: &str, message: impl Into<String>) -> ParseError {
    ParseError::MalformedDocument { path: path.to_owned(), message: message.into() }
}

/// Parses block-program JSON text. Only structure is checked here.
pub fn parse_program(doc: &str) -> Result<BlockProgram, ParseError> {
    let value: Value = serde_json::from_str(doc).map_err(|e| malformed("$", e.to_string()))?;
    program_from_value(&value)
}

/// Parses an already-decoded block-program document.
pub fn program_from_value(value: &Value) -> Result<BlockProgram, ParseError> {
    let obj = value.as_object().ok_or_else(|| malformed("$", "document must be an object"))?;
    if let Some(extra) = obj.keys().find(|k| k.as_str() != "blocks") {
        return Err(malformed("$", format!("unexpected key `{extra}`")));
    }
    let blocks = obj
        .get("blocks")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("$", "`blocks` must be an array"))?;
    Ok(BlockProgram { blocks: parse_nodes(blocks, "", "blocks", 1)? })
}

fn parse_nodes(
    items: &[Value],
    parent: &str,
    field: &str,
    depth: usize,
) -> Result<Vec<BlockNode>, ParseError> {
    items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_node(v, &child_path(parent, field, i), depth))
        .collect()
}

fn parse_node(value: &Value, path: &str, depth: usize) -> Result<BlockNode, ParseError> {
    if depth > MAX_DEPTH {
        return Err(ParseError::DepthExceeded { path: path.to_owned() });
    }
    let obj = value.as_object().ok_or_else(|| malformed(path, "block must be an object"))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(path, "block needs a string `kind`"))?;
    let (node, allowed): (BlockNode, &[&str]) = match kind {
        "move_forward" => (BlockNode::MoveForward, &["kind"]),
        "move_backward" => (BlockNode::MoveBackward, &["kind"]),
        "move_left" => (BlockNode::MoveLeft, &["kind"]),
        "move_right" => (BlockNode::MoveRight, &["kind"]),
        "stop" => (BlockNode::Stop, &["kind"]),
        "expression" => {
            let name = obj
                .get("expression")
                .and_then(Value::as_str)
                .ok_or_else(|| malformed(path, "expression block needs a string `expression`"))?;
            (BlockNode::Expression(name.to_owned()), &["kind", "expression"])
        }
        "repeat" => {
            let count = obj
                .get("count")
                .and_then(Value::as_i64)
                .ok_or_else(|| malformed(path, "repeat block needs an integer `count`"))?;
            let body = match obj.get("body") {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::Array(items)) => parse_nodes(items, path, "body", depth + 1)?,
                Some(_) => return Err(malformed(path, "`body` must be an array")),
            };
            (BlockNode::Repeat { count, body }, &["kind", "count", "body"])
        }
        other => {
            return Err(ParseError::UnknownBlockKind { path: path.to_owned(), kind: other.into() })
        }
    };
    if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(malformed(path, format!("unexpected key `{extra}` on `{kind}` block")));
    }
    Ok(node)
}

/// Canonical serialization of a program back to the block-program schema.
pub fn program_to_document(program: &BlockProgram) -> String {
    program_to_value(program).to_string()
}

fn program_to_value(program: &BlockProgram) -> Value {
    let mut obj = Map::new();
    obj.insert("blocks".into(), Value::Array(program.blocks.iter().map(node_to_value).collect()));
    Value::Object(obj)
}

fn node_to_value(node: &BlockNode) -> Value {
    let mut obj = Map::new();
    obj.insert("kind".into(), Value::String(node.kind().into()));
    match node {
        BlockNode::Expression(name) => {
            obj.insert("expression".into(), Value::String(name.clone()));
        }
        BlockNode::Repeat { count, body } => {
            obj.insert("count".into(), Value::from(*count));
            obj.insert("body".into(), Value::Array(body.iter().map(node_to_value).collect()));
        }
        _ => {}
    }
    Value::Object(obj)
}
