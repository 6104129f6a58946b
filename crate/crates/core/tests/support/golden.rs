//! Hand-written block programs with frozen compiler outputs.
//!
//! Each `<name>.blocks.json` sits next to `<name>.commands.json` (canonical
//! wire document plus a newline) and `<name>.py` (emitted script). Missing
//! outputs are written from the oracle interpreter when `BLOCKBOT_BLESS`
//! is set; existing ones are never rewritten.

use std::fs;
use std::path::{Path, PathBuf};

use blockbot_core::command::encode_command_list;
use blockbot_core::compiler::{emit_script, lower_to_commands, parse_program};
use serde_json::Value;

use super::oracles::{interpret, Outcome};

pub struct Case {
    pub name: String,
    pub blocks: PathBuf,
}

pub fn corpus(dir: &Path) -> Vec<Case> {
    let mut cases: Vec<Case> = fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", dir.display()))
        .filter_map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name()?.to_str()?.strip_suffix(".blocks.json")?.to_owned();
            Some(Case { name, blocks: path })
        })
        .collect();
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    cases
}

fn render_command(v: &Value) -> String {
    let op = v["op"].as_str().unwrap();
    match v.get("expression") {
        Some(e) => format!("{{\"op\":\"{op}\",\"expression\":\"{}\"}}", e.as_str().unwrap()),
        None => format!("{{\"op\":\"{op}\"}}"),
    }
}

fn render_line(v: &Value) -> String {
    let op = v["op"].as_str().unwrap();
    match v.get("expression") {
        Some(e) => format!("robot.{op}(\"{}\")\n", e.as_str().unwrap()),
        None => format!("robot.{op}()\n"),
    }
}

/// Oracle rendering of both outputs.
pub fn oracle_outputs(blocks_doc: &str) -> (String, String) {
    let program = parse_program(blocks_doc).expect("corpus programs parse");
    let Outcome::Commands(cmds) = interpret(&program) else {
        panic!("corpus programs are valid");
    };
    let body: Vec<String> = cmds.iter().map(render_command).collect();
    let doc = format!("{{\"commands\":[{}]}}\n", body.join(","));
    let script: String = cmds.iter().map(render_line).collect();
    (doc, script)
}

pub fn bless(case: &Case) {
    let src = fs::read_to_string(&case.blocks).unwrap();
    let (doc, script) = oracle_outputs(&src);
    let dir = case.blocks.parent().unwrap();
    for (ext, text) in [("commands.json", doc), ("py", script)] {
        let path = dir.join(format!("{}.{ext}", case.name));
        if !path.exists() {
            fs::write(path, text).unwrap();
        }
    }
}

pub struct Produced {
    pub commands_doc: String,
    pub script: String,
    pub command_count: usize,
}

pub fn produce(case: &Case) -> Result<Produced, String> {
    let src = fs::read_to_string(&case.blocks).map_err(|e| e.to_string())?;
    let program = parse_program(&src).map_err(|e| e.to_string())?;
    let list = lower_to_commands(&program).map_err(|e| e.to_string())?;
    Ok(Produced {
        commands_doc: format!("{}\n", encode_command_list(&list)),
        script: emit_script(&list),
        command_count: list.len(),
    })
}

/// Compares production output with the stored files, byte for byte.
pub fn check(case: &Case) -> Result<Produced, String> {
    if std::env::var_os("BLOCKBOT_BLESS").is_some() {
        bless(case);
    }
    let produced = produce(case)?;
    let dir = case.blocks.parent().unwrap();
    let read = |ext: &str| {
        let p = dir.join(format!("{}.{ext}", case.name));
        fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))
    };
    if read("commands.json")? != produced.commands_doc {
        return Err(format!("{}: command document differs from stored output", case.name));
    }
    if read("py")? != produced.script {
        return Err(format!("{}: script differs from stored output", case.name));
    }
    Ok(produced)
}
