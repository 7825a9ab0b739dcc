use std::fs;
use std::path::{Path, PathBuf};

use popverify::{emit_protocol, parse_predicate, parse_protocol, validate_model};
use popverify::verifier::{sweep, SweepOptions};

fn dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(name)
}

fn files(name: &str, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir(name))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_protocols_validate_and_reemit_identically() {
    let all = files("protocols", "pp");
    assert!(all.len() >= 5);
    for path in all {
        let text = fs::read_to_string(&path).unwrap();
        let p = parse_protocol(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        validate_model(&p).unwrap_or_else(|v| panic!("{}: {v:?}", path.display()));
        let again = parse_protocol(&emit_protocol(&p)).unwrap();
        assert_eq!(again, p, "{}", path.display());
    }
}

#[test]
fn shipped_predicates_parse() {
    for path in files("predicates", "pred") {
        parse_predicate(&fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn shipped_pairs_verify_clean() {
    for name in ["tower_a2", "parity", "mod3", "majority"] {
        let p = parse_protocol(&fs::read_to_string(dir("protocols").join(format!("{name}.pp"))).unwrap()).unwrap();
        let psi = parse_predicate(&fs::read_to_string(dir("predicates").join(format!("{name}.pred"))).unwrap()).unwrap();
        let rep = sweep(&p, &psi, &SweepOptions::up_to(4)).unwrap();
        assert!(rep.is_clean(), "{name}: {}", rep.to_text());
    }
}
