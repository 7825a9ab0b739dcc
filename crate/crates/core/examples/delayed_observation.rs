//! Delayed observation can detect presence but not counting: the presence
//! detector verifies, while the k = 2 tower moved to delayed observation
//! accepts a single `a`.

use popverify::library::{build_delayed_observation_presence, build_simple_threshold};
use popverify::semilinear::PredicateExpr;
use popverify::transforms::immediate_to_delayed;
use popverify::verifier::{sweep, SweepOptions, TransitCap};

fn main() {
    let ab = vec!["a".to_string(), "b".to_string()];
    let opts = SweepOptions::up_to(4).transit_cap(TransitCap::PerMessage(1));

    let presence = build_delayed_observation_presence(&ab, |bits| bits[0]).unwrap();
    print!("{}", sweep(&presence, &PredicateExpr::at_least("a", 1), &opts).unwrap().to_text());

    let tower = immediate_to_delayed(&build_simple_threshold("a", 2, &ab).unwrap()).unwrap();
    print!("{}", sweep(&tower, &PredicateExpr::at_least("a", 2), &opts).unwrap().to_text());
}
