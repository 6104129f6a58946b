//! Robot command vocabulary and its canonical JSON wire encoding.
//!
//! The wire document is `{"commands":[...]}` where every element carries an
//! `op` tag (`move_forward`, `move_backward`, `turn_left`, `turn_right`,
//! `stop`, `express`, `say`). `express` adds an `expression` key and `say`
//! adds a `text` key. Encoding is canonical: `op` first, no whitespace.

use std::fmt;
use std::sync::LazyLock;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Maximum number of commands in one list.
pub const MAX_COMMANDS: usize = 10_000;

/// Maximum length of a `Say` text, in characters.
pub const MAX_SAY_CHARS: usize = 280;

/// Number of expressions a registry must hold.
pub const EXPRESSION_COUNT: usize = 11;

/// Shipped expression names, in registry order.
pub const STANDARD_EXPRESSIONS: [&str; EXPRESSION_COUNT] = [
    "happy",
    "sad",
    "angry",
    "surprised",
    "afraid",
    "disgusted",
    "neutral",
    "love",
    "sleepy",
    "confused",
    "excited",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unknown op `{0}`")]
    UnknownOp(String),
    #[error("unknown expression `{0}`")]
    UnknownExpression(String),
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),
}

impl CommandError {
    /// Stable snake_case code used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            CommandError::MalformedDocument(_) => "malformed_document",
            CommandError::UnknownOp(_) => "unknown_op",
            CommandError::UnknownExpression(_) => "unknown_expression",
            CommandError::LimitExceeded(_) => "limit_exceeded",
        }
    }
}

/// Name of one of the robot's facial expressions.
///
/// Values are only produced by an [`ExpressionRegistry`] lookup or by
/// deserializing previously validated documents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExpressionId(String);

impl ExpressionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ExpressionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for ExpressionId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ExpressionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        if is_identifier(&name) {
            Ok(ExpressionId(name))
        } else {
            Err(de::Error::custom(format!("invalid expression name `{name}`")))
        }
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// The set of expressions a deployment supports. Always exactly
/// [`EXPRESSION_COUNT`] unique lowercase identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpressionRegistry {
    names: Vec<ExpressionId>,
}

static STANDARD_REGISTRY: LazyLock<ExpressionRegistry> = LazyLock::new(|| {
    ExpressionRegistry::new(STANDARD_EXPRESSIONS.iter().copied())
        .expect("shipped expression set is valid")
});

impl ExpressionRegistry {
    pub fn new<I, S>(names: I) -> Result<Self, CommandError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<ExpressionId> = Vec::with_capacity(EXPRESSION_COUNT);
        for name in names {
            let name = name.as_ref();
            if !is_identifier(name) {
                return Err(CommandError::MalformedDocument(format!(
                    "expression name `{name}` is not a lowercase identifier"
                )));
            }
            if out.iter().any(|e| e.0 == name) {
                return Err(CommandError::MalformedDocument(format!(
                    "duplicate expression name `{name}`"
                )));
            }
            out.push(ExpressionId(name.to_owned()));
        }
        if out.len() != EXPRESSION_COUNT {
            return Err(CommandError::MalformedDocument(format!(
                "expression registry needs {EXPRESSION_COUNT} names, got {}",
                out.len()
            )));
        }
        Ok(ExpressionRegistry { names: out })
    }

    /// The shipped registry.
    pub fn standard() -> &'static ExpressionRegistry {
        &STANDARD_REGISTRY
    }

    /// Resolves a name, case-insensitively.
    pub fn lookup(&self, name: &str) -> Result<ExpressionId, CommandError> {
        let folded = name.to_lowercase();
        self.names
            .iter()
            .find(|e| e.0 == folded)
            .cloned()
            .ok_or_else(|| CommandError::UnknownExpression(name.to_owned()))
    }

    pub fn contains(&self, id: &ExpressionId) -> bool {
        self.names.contains(id)
    }

    /// Position of `id` in registry order.
    pub fn index_of(&self, id: &ExpressionId) -> Option<usize> {
        self.names.iter().position(|e| e == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExpressionId> {
        self.names.iter()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl Default for ExpressionRegistry {
    fn default() -> Self {
        Self::standard().clone()
    }
}

/// Resolves `name` against the shipped registry.
pub fn expression_from_name(name: &str) -> Result<ExpressionId, CommandError> {
    ExpressionRegistry::standard().lookup(name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    MoveForward,
    MoveBackward,
    TurnLeft,
    TurnRight,
    Stop,
    Express(ExpressionId),
    Say(String),
}

impl Command {
    /// Builds a `Say`, enforcing the text invariants.
    pub fn say(text: impl Into<String>) -> Result<Command, CommandError> {
        let text = text.into();
        check_say_text(&text)?;
        Ok(Command::Say(text))
    }

    pub fn op(&self) -> &'static str {
        match self {
            Command::MoveForward => "move_forward",
            Command::MoveBackward => "move_backward",
            Command::TurnLeft => "turn_left",
            Command::TurnRight => "turn_right",
            Command::Stop => "stop",
            Command::Express(_) => "express",
            Command::Say(_) => "say",
        }
    }

    pub fn is_motion(&self) -> bool {
        matches!(
            self,
            Command::MoveForward | Command::MoveBackward | Command::TurnLeft | Command::TurnRight
        )
    }

    /// JSON value in wire form.
    pub fn to_wire_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("op".into(), Value::String(self.op().into()));
        match self {
            Command::Express(e) => {
                map.insert("expression".into(), Value::String(e.0.clone()));
            }
            Command::Say(t) => {
                map.insert("text".into(), Value::String(t.clone()));
            }
            _ => {}
        }
        Value::Object(map)
    }

    /// Decodes one command object, checking expression membership in `registry`.
    pub fn from_value(value: &Value, registry: &ExpressionRegistry) -> Result<Command, CommandError> {
        Self::from_value_inner(value, Some(registry))
    }

    fn from_value_inner(
        value: &Value,
        registry: Option<&ExpressionRegistry>,
    ) -> Result<Command, CommandError> {
        let obj = value
            .as_object()
            .ok_or_else(|| CommandError::MalformedDocument("command must be an object".into()))?;
        let op = obj
            .get("op")
            .and_then(Value::as_str)
            .ok_or_else(|| CommandError::MalformedDocument("command needs a string `op`".into()))?;
        let allowed: &[&str] = match op {
            "express" => &["op", "expression"],
            "say" => &["op", "text"],
            _ => &["op"],
        };
        let cmd = match op {
            "move_forward" => Command::MoveForward,
            "move_backward" => Command::MoveBackward,
            "turn_left" => Command::TurnLeft,
            "turn_right" => Command::TurnRight,
            "stop" => Command::Stop,
            "express" => {
                let name = obj.get("expression").and_then(Value::as_str).ok_or_else(|| {
                    CommandError::MalformedDocument("express needs a string `expression`".into())
                })?;
                match registry {
                    Some(r) => Command::Express(r.lookup(name)?),
                    None if is_identifier(name) => Command::Express(ExpressionId(name.into())),
                    None => return Err(CommandError::UnknownExpression(name.into())),
                }
            }
            "say" => {
                let text = obj.get("text").and_then(Value::as_str).ok_or_else(|| {
                    CommandError::MalformedDocument("say needs a string `text`".into())
                })?;
                Command::say(text)?
            }
            other => return Err(CommandError::UnknownOp(other.into())),
        };
        if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CommandError::MalformedDocument(format!(
                "unexpected key `{extra}` on `{op}`"
            )));
        }
        Ok(cmd)
    }
}

fn check_say_text(text: &str) -> Result<(), CommandError> {
    if text.trim().is_empty() {
        return Err(CommandError::MalformedDocument("say text is empty".into()));
    }
    let n = text.chars().count();
    if n > MAX_SAY_CHARS {
        return Err(CommandError::LimitExceeded(format!(
            "say text has {n} characters, limit is {MAX_SAY_CHARS}"
        )));
    }
    Ok(())
}

// Persisted documents store commands in wire form; expression names are only
// syntax-checked here because membership was enforced when they entered.
impl Serialize for Command {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("op", self.op())?;
        match self {
            Command::Express(e) => map.serialize_entry("expression", e.as_str())?,
            Command::Say(t) => map.serialize_entry("text", t)?,
            _ => {}
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Command {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        Command::from_value_inner(&value, None).map_err(de::Error::custom)
    }
}

/// Ordered list of at most [`MAX_COMMANDS`] commands.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Command>", into = "Vec<Command>")]
pub struct CommandList(Vec<Command>);

impl CommandList {
    pub fn new(commands: Vec<Command>) -> Result<Self, CommandError> {
        if commands.len() > MAX_COMMANDS {
            return Err(CommandError::LimitExceeded(format!(
                "{} commands, limit is {MAX_COMMANDS}",
                commands.len()
            )));
        }
        Ok(CommandList(commands))
    }

    pub fn empty() -> Self {
        CommandList(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Command] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Command> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<Command> {
        self.0
    }
}

impl TryFrom<Vec<Command>> for CommandList {
    type Error = CommandError;

    fn try_from(v: Vec<Command>) -> Result<Self, Self::Error> {
        CommandList::new(v)
    }
}

impl From<CommandList> for Vec<Command> {
    fn from(l: CommandList) -> Self {
        l.0
    }
}

impl<'a> IntoIterator for &'a CommandList {
    type Item = &'a Command;
    type IntoIter = std::slice::Iter<'a, Command>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Canonical wire encoding of a single command.
pub fn encode_command(cmd: &Command) -> String {
    // serde_json's default map keeps keys sorted, so "op" must be written by hand
    let mut out = String::with_capacity(32);
    push_command(&mut out, cmd);
    out
}

fn push_command(out: &mut String, cmd: &Command) {
    out.push_str("{\"op\":\"");
    out.push_str(cmd.op());
    out.push('"');
    match cmd {
        Command::Express(e) => {
            out.push_str(",\"expression\":");
            out.push_str(&Value::String(e.0.clone()).to_string());
        }
        Command::Say(t) => {
            out.push_str(",\"text\":");
            out.push_str(&Value::String(t.clone()).to_string());
        }
        _ => {}
    }
    out.push('}');
}

/// Canonical wire encoding: `{"commands":[...]}`, no insignificant whitespace.
pub fn encode_command_list(list: &CommandList) -> String {
    let mut out = String::with_capacity(16 + list.len() * 24);
    out.push_str("{\"commands\":[");
    for (i, cmd) in list.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_command(&mut out, cmd);
    }
    out.push_str("]}");
    out
}

/// Decodes a wire document against the shipped registry.
pub fn decode_command_list(doc: &str) -> Result<CommandList, CommandError> {
    decode_command_list_with(doc, ExpressionRegistry::standard())
}

pub fn decode_command_list_with(
    doc: &str,
    registry: &ExpressionRegistry,
) -> Result<CommandList, CommandError> {
    let value: Value =
        serde_json::from_str(doc).map_err(|e| CommandError::MalformedDocument(e.to_string()))?;
    command_list_from_value(&value, registry)
}

/// Decodes an already-parsed wire document.
pub fn command_list_from_value(
    value: &Value,
    registry: &ExpressionRegistry,
) -> Result<CommandList, CommandError> {
    let obj = value
        .as_object()
        .ok_or_else(|| CommandError::MalformedDocument("document must be an object".into()))?;
    if let Some(extra) = obj.keys().find(|k| k.as_str() != "commands") {
        return Err(CommandError::MalformedDocument(format!("unexpected key `{extra}`")));
    }
    let items = obj
        .get("commands")
        .and_then(Value::as_array)
        .ok_or_else(|| CommandError::MalformedDocument("`commands` must be an array".into()))?;
    if items.len() > MAX_COMMANDS {
        return Err(CommandError::LimitExceeded(format!(
            "{} commands, limit is {MAX_COMMANDS}",
            items.len()
        )));
    }
    let commands = items
        .iter()
        .map(|v| Command::from_value(v, registry))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CommandList(commands))
}
