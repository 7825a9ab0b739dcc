use std::fs;

use popverify::cli::{run, EXIT_BUDGET, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE};
use popverify::parse_protocol;
use popverify::model::{validate_as, Model, ModelKind};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("popverify").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn build_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let proto = dir.path().join("tower.pp");
    let proto = proto.to_str().unwrap();
    let (code, _, err) = call(&["build", "threshold", "--sigma", "a", "--k", "3", "--alphabet", "a,b", "--out", proto]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, out, _) = call(&["verify", "--protocol", proto, "--expr", "(count a 3)", "--max-n", "5"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("0 mismatches"));
    let (code, out, _) = call(&["verify", "--protocol", proto, "--expr", "(count a 2)", "--max-n", "5"]);
    assert_eq!(code, EXIT_MISMATCH);
    assert!(out.contains("MISMATCH") || out.contains("mismatch"));
}

#[test]
fn transform_to_queued_is_verifiable_under_a_cap() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("parity.pp");
    let dst = dir.path().join("queued.pp");
    let (src, dst) = (src.to_str().unwrap(), dst.to_str().unwrap());
    assert_eq!(call(&["build", "modulo", "--coef", "a=1", "--residue", "1", "--modulus", "2", "--out", src]).0, EXIT_OK);
    let (code, _, err) = call(&["transform", "--kind", "queued", "--in", src, "--out", dst]);
    assert_eq!(code, EXIT_OK, "{err}");
    let p = parse_protocol(&fs::read_to_string(dst).unwrap()).unwrap();
    assert!(validate_as(&p, ModelKind::new(Model::QueuedTransmission)).is_ok());
    let (code, out, _) = call(&[
        "verify", "--protocol", dst, "--expr", "(mod (v (a 1)) 1 2)", "--max-n", "3", "--transit-cap", "population",
        "--format", "json",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn tiny_budget_reports_budget_exit() {
    let dir = tempfile::tempdir().unwrap();
    let proto = dir.path().join("avg.pp");
    let proto = proto.to_str().unwrap();
    call(&["build", "average", "--coef", "a=1", "--coef", "b=-1", "--threshold", "1", "--out", proto]);
    let (code, _, _) = call(&["verify", "--protocol", proto, "--expr", "(ge (v (a 1) (b -1)) 1)", "--max-n", "5", "--budget", "3"]);
    assert_eq!(code, EXIT_BUDGET);
}

#[test]
fn pred_equiv_finds_counterexample() {
    let (code, out, _) = call(&[
        "pred", "equiv", "--left", "(mod (v (a 1)) 1 2)", "--right", "(pow2 a)", "--symbols", "a", "--per-axis", "8",
    ]);
    assert_ne!(code, EXIT_OK);
    assert!(out.contains("{a:2}"), "{out}");
}

#[test]
fn simulate_and_analyze_print_results() {
    let dir = tempfile::tempdir().unwrap();
    let proto = dir.path().join("tower.pp");
    let proto = proto.to_str().unwrap();
    call(&["build", "threshold", "--sigma", "a", "--k", "2", "--alphabet", "a,b", "--out", proto]);
    let (code, out, err) = call(&["simulate", "--protocol", proto, "--input", "{a:2, b:1}", "--seed", "7"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(!out.is_empty());
    let (code, out, err) = call(&["analyze", "--protocol", proto, "--size-bound", "3"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("k"), "{out}");
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(call(&["verify"]).0, EXIT_USAGE);
    assert_eq!(call(&["verify", "--protocol", "/nonexistent.pp", "--expr", "(count a 1)", "--max-n", "2"]).0, EXIT_USAGE);
}
