use std::io::Read;
use std::path::Path;

use blockbot_core::command::{encode_command_list, CommandList};
use blockbot_core::compiler::{emit_script, parse_program, BlockProgram, Compiler, Diagnostic};
use serde_json::json;

use crate::exit::Failure;
use crate::output::Output;

pub fn read_input(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::Usage(format!("cannot read stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Parse, validate and lower. Diagnostics (warnings included) are returned
/// alongside the result; errors turn into `Failure::Invalid`.
pub fn build(text: &str) -> (Result<CommandList, Failure>, Vec<Diagnostic>) {
    let program: BlockProgram = match parse_program(text) {
        Ok(p) => p,
        Err(e) => return (Err(Failure::Invalid(format!("{}: {e}", e.code()))), Vec::new()),
    };
    let compiler = Compiler::default();
    let report = compiler.validate(&program);
    if !report.ok {
        let n = report.errors().count();
        return (Err(Failure::Invalid(format!("{n} error(s) in program"))), report.diagnostics);
    }
    let list = compiler.lower(&program).map_err(|e| Failure::Invalid(e.to_string()));
    (list, report.diagnostics)
}

fn show(d: &Diagnostic, out: &Output, to_stdout: bool) {
    if to_stdout {
        out.record(&d.to_string(), json!(d));
    } else {
        eprintln!("{d}");
    }
}

pub fn run(input: &Path, script: bool, check: bool, out: &Output) -> Result<(), Failure> {
    let text = read_input(input)?;
    let (list, diagnostics) = build(&text);
    // with --check the diagnostics are the payload
    for d in &diagnostics {
        show(d, out, check);
    }
    let list = list?;
    if check {
        return Ok(());
    }
    if script {
        out.raw(&emit_script(&list));
    } else {
        out.raw(&encode_command_list(&list));
        out.raw("\n");
    }
    Ok(())
}
