// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn lib2vec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lib2vec")).args(args).output().expect("binary runs")
}

fn error_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("stderr has a line");
    serde_json::from_str(line).expect("stderr ends with a JSON error")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(lib2vec(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lib2vec(&["eval"]).status.code(), Some(2));
}

#[test]
fn truthtable_of_nand2() {
    let o = lib2vec(&["truthtable", "NAND2x1_ASAP7_75t_R", "--synthetic", "toy"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "1110");
}

#[test]
fn missing_liberty_file_is_an_io_error() {
    let o = lib2vec(&["parse", "--lib", "/nonexistent/cells.lib"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "io");
}

#[test]
fn pipeline_then_mismatched_eval() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = lib2vec(&[
        "pipeline",
        "--synthetic",
        "toy",
        "--out",
        s(&run),
        "--d",
        "6",
        "--epochs",
        "3",
        "--slew-points",
        "3",
        "--load-points",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["stages"].as_array().unwrap().len(), 6);
    for f in ["VERSION", "model/report.json", "eval/results.json", "export/functional_types.csv"] {
        assert!(run.join(f).exists(), "{f} missing");
    }

    let tests = dir.path().join("tests_d9");
    let o = lib2vec(&[
        "testgen",
        "--synthetic",
        "toy",
        "--out",
        s(&tests),
        "--d",
        "9",
        "--slew-points",
        "3",
        "--load-points",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lib2vec(&["eval", "--checkpoint", s(&run.join("model")), "--tests", s(&tests)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "dimension_mismatch");

    let o = lib2vec(&["eval", "--checkpoint", s(&run.join("model")), "--tests", s(&run.join("tests")), "--k", "1,3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lib2vec(&["analogy", "--checkpoint", s(&run.join("model")), "AND2", "NAND2", "OR2", "--top", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn netgen_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nets");
    let o = lib2vec(&["netgen", "--count", "2", "--seed", "5", "--synthetic", "toy", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let net = out.join("netlist_00000.json");
    let labels = dir.path().join("labels.jsonl");
    let o = lib2vec(&["simulate", "--netlist", s(&net), "--mode", "random", "--vectors", "256", "--out", s(&labels)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&labels).unwrap();
    let mut pins = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if let Some(p) = v.get("logic_probability").and_then(|p| p.as_f64()) {
            assert!((0.0..=1.0).contains(&p));
            pins += 1;
        }
    }
    assert!(pins > 0);
}
