use std::fmt::Write;

use crate::command::{Command, CommandList};

/// Emits one `robot.<op>(...)` call per command, each terminated by `\n`.
pub fn emit_script(list: &CommandList) -> String {
    let mut out = String::with_capacity(list.len() * 24);
    for cmd in list {
        match cmd {
            Command::MoveForward => out.push_str("robot.move_forward()"),
            Command::MoveBackward => out.push_str("robot.move_backward()"),
            Command::TurnLeft => out.push_str("robot.turn_left()"),
            Command::TurnRight => out.push_str("robot.turn_right()"),
            Command::Stop => out.push_str("robot.stop()"),
            Command::Express(e) => {
                out.push_str("robot.express(");
                out.push_str(&python_string_literal(e.as_str()));
                out.push(')');
            }
            Command::Say(text) => {
                out.push_str("robot.say(");
                out.push_str(&python_string_literal(text));
                out.push(')');
            }
        }
        out.push('\n');
    }
    out
}

/// Double-quoted Python string literal. Everything that could end a line or
/// a literal is escaped, so the result always fits on one source line.
pub fn python_string_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || (0x7f..=0x9f).contains(&(c as u32)) => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            '\u{2028}' | '\u{2029}' | '\u{feff}' => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
