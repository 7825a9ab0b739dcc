//! Token-metered simulation into delayed transmission. The source accepts
//! when exactly one `c` is present and `a - b >= 1`; the simulation uses `c`
//! as the token and is checked under that promise.

use popverify::library::{build_simple_threshold, build_threshold_avg, product, ThresholdParams};
use popverify::semilinear::parse_predicate;
use popverify::transforms::two_way_to_queued_tokens;
use popverify::verifier::{sweep, SweepOptions, TransitCap};

fn main() {
    let abc: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let src = product(
        &[
            build_threshold_avg(&ThresholdParams::new([("a", 1), ("b", -1), ("c", 0)], 1)).unwrap(),
            build_simple_threshold("c", 1, &abc).unwrap(),
            build_simple_threshold("c", 2, &abc).unwrap(),
        ],
        |o| o[0] && o[1] && !o[2],
    )
    .unwrap();
    let cert = two_way_to_queued_tokens(&src, "c", 2).unwrap();
    println!("target: {} states, {} messages", cert.target.states.len(), cert.target.messages.len());

    let psi = parse_predicate("(and (count c 1) (not (count c 2)) (ge (v (a 1) (b -1)) 1))").unwrap();
    let promise = parse_predicate("(and (count c 1) (not (count c 2)))").unwrap();
    let opts = SweepOptions::up_to(4).promise(promise).transit_cap(TransitCap::Population);
    print!("{}", sweep(&cert.target, &psi, &opts).unwrap().to_text());
}
