mod support;

use std::path::Path;

use blockbot_core::command::{decode_command_list, CommandList};
use blockbot_core::compiler::{
    emit_script, lower_to_commands, parse_program, program_to_document, validate_program, BlockNode,
    BlockProgram, LowerError,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde_json::Value;

use support::golden;
use support::oracles::{interpret, python_syntax_check, random_program, Outcome};

fn golden_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden"))
}

fn production(program: &BlockProgram) -> Outcome {
    match lower_to_commands(program) {
        Ok(list) => Outcome::Commands(list.iter().map(|c| c.to_wire_value()).collect()),
        Err(LowerError::UnknownExpression { .. }) => Outcome::UnknownExpression,
        Err(LowerError::CountOutOfRange { .. }) => Outcome::CountOutOfRange,
        Err(LowerError::LimitExceeded) => Outcome::TooLong,
    }
}

#[test]
fn lowering_matches_interpreter_on_random_programs() {
    let mut rng = StdRng::seed_from_u64(0xb10c);
    let mut kinds = [0usize; 4];
    for i in 0..1000 {
        let program = random_program(&mut rng, 4, 10);
        let expected = interpret(&program);
        kinds[match &expected {
            Outcome::Commands(_) => 0,
            Outcome::UnknownExpression => 1,
            Outcome::CountOutOfRange => 2,
            Outcome::TooLong => 3,
        }] += 1;
        assert_eq!(production(&program), expected, "program #{i}: {}", program_to_document(&program));
        assert_eq!(validate_program(&program).ok, matches!(expected, Outcome::Commands(_)), "program #{i}");
    }
    // the generator has to exercise the success path mostly
    assert!(kinds[0] > 700, "{kinds:?}");
}

#[test]
fn golden_corpus_matches_stored_outputs() {
    let cases = golden::corpus(golden_dir());
    assert!(cases.len() >= 10);
    for case in &cases {
        golden::check(case).unwrap();
    }
}

#[test]
fn golden_outputs_agree_with_interpreter() {
    for case in golden::corpus(golden_dir()) {
        let src = std::fs::read_to_string(&case.blocks).unwrap();
        let (doc, script) = golden::oracle_outputs(&src);
        let produced = golden::produce(&case).unwrap();
        assert_eq!(produced.commands_doc, doc, "{}", case.name);
        assert_eq!(produced.script, script, "{}", case.name);
    }
}

#[test]
fn emitted_scripts_are_python() {
    for case in golden::corpus(golden_dir()) {
        let produced = golden::produce(&case).unwrap();
        python_syntax_check(&produced.script).unwrap_or_else(|e| panic!("{}: {e}", case.name));
        assert_eq!(produced.script.lines().count(), produced.command_count, "{}", case.name);
    }
}

#[test]
fn hostile_say_text_stays_on_one_line() {
    let texts = [
        "plain",
        "quote \" and backslash \\",
        "line\nbreak\r\n",
        "tab\tnul\u{0}del\u{7f}",
        "unicode separators \u{2028}\u{2029}\u{85}\u{feff}",
        "emoji 😀 and accents éà",
        "''' triple \"\"\"",
        "trailing backslash \\",
    ];
    let list = CommandList::new(texts.iter().map(|t| blockbot_core::Command::say(*t).unwrap()).collect())
        .unwrap();
    let script = emit_script(&list);
    assert_eq!(script.lines().count(), texts.len());
    python_syntax_check(&script).unwrap();
    // the literals evaluate back to the original strings
    let check = format!(
        "import ast, sys\nsrc = sys.stdin.read()\nvals = [ast.literal_eval(l[len('robot.say('):-1]) for l in src.splitlines()]\nassert vals == {}, vals\n",
        serde_json::to_string(&texts).unwrap()
    );
    let out = std::process::Command::new("python3")
        .args(["-c", &check])
        .stdin(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            use std::io::Write;
            c.stdin.take().unwrap().write_all(script.as_bytes())?;
            c.wait_with_output()
        })
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn block_documents_round_trip() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..200 {
        let program = random_program(&mut rng, 4, 10);
        let doc = program_to_document(&program);
        assert_eq!(parse_program(&doc).unwrap(), program);
    }
}

#[test]
fn command_documents_round_trip_through_decode() {
    for case in golden::corpus(golden_dir()) {
        let produced = golden::produce(&case).unwrap();
        let list = decode_command_list(produced.commands_doc.trim_end()).unwrap();
        assert_eq!(list.len(), produced.command_count);
        let v: Value = serde_json::from_str(&produced.commands_doc).unwrap();
        assert_eq!(v["commands"].as_array().unwrap().len(), list.len());
    }
}

fn arb_leaf() -> impl Strategy<Value = BlockNode> {
    prop_oneof![
        Just(BlockNode::MoveForward),
        Just(BlockNode::MoveBackward),
        Just(BlockNode::MoveLeft),
        Just(BlockNode::MoveRight),
        Just(BlockNode::Stop),
        prop::sample::select(support::oracles::EXPRESSIONS.to_vec()).prop_map(|e| BlockNode::Expression(e.into())),
    ]
}

fn arb_node() -> impl Strategy<Value = BlockNode> {
    arb_leaf().prop_recursive(3, 24, 4, |inner| {
        (1i64..=5, prop::collection::vec(inner, 0..4)).prop_map(|(count, body)| BlockNode::Repeat { count, body })
    })
}

fn arb_program() -> impl Strategy<Value = BlockProgram> {
    prop::collection::vec(arb_node(), 0..6).prop_map(BlockProgram::new)
}

fn lowered(p: &BlockProgram) -> Vec<blockbot_core::Command> {
    lower_to_commands(p).unwrap().into_vec()
}

proptest! {
    #[test]
    fn lowering_is_compositional(a in arb_program(), b in arb_program()) {
        let mut joined = a.blocks.clone();
        joined.extend(b.blocks.clone());
        let mut expected = lowered(&a);
        expected.extend(lowered(&b));
        prop_assert_eq!(lowered(&BlockProgram::new(joined)), expected);
    }

    #[test]
    fn repeat_is_concatenation(body in prop::collection::vec(arb_node(), 0..4), k in 1i64..=6) {
        let once = lowered(&BlockProgram::new(body.clone()));
        let rep = lowered(&BlockProgram::new(vec![BlockNode::Repeat { count: k, body }]));
        prop_assert_eq!(rep.len(), once.len() * k as usize);
        let expected: Vec<_> = (0..k).flat_map(|_| once.iter().cloned()).collect();
        prop_assert_eq!(rep, expected);
    }

    #[test]
    fn validation_agrees_with_lowering(p in arb_program()) {
        prop_assert_eq!(validate_program(&p).ok, lower_to_commands(&p).is_ok());
    }

    #[test]
    fn scripts_have_one_line_per_command(p in arb_program()) {
        let list = lower_to_commands(&p).unwrap();
        prop_assert_eq!(emit_script(&list).lines().count(), list.len());
    }
}
