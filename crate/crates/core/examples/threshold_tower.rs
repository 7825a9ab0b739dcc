//! Build the tower protocol for `count(a) >= 3` and check it on every input
//! of up to six agents.

use popverify::library::build_simple_threshold;
use popverify::semilinear::PredicateExpr;
use popverify::verifier::{sweep, SweepOptions};

fn main() {
    let alphabet = vec!["a".to_string(), "b".to_string()];
    let p = build_simple_threshold("a", 3, &alphabet).unwrap();
    print!("{}", popverify::emit_protocol(&p));

    let report = sweep(&p, &PredicateExpr::at_least("a", 3), &SweepOptions::up_to(6)).unwrap();
    println!("{}", report.to_text());
}
