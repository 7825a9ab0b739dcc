//! Majority through averaging: `a - b >= 1`. Prints one random fair run
//! and the exhaustive verdict for the same input.

use popverify::library::{build_threshold_avg, ThresholdParams};
use popverify::verifier::{fair_run, verdict, ExploreOptions};

fn main() {
    let p = build_threshold_avg(&ThresholdParams::new([("a", 1), ("b", -1)], 1)).unwrap();
    let r = p.compile().unwrap();
    let x = p.parse_input("{a:3, b:2}").unwrap();
    let c0 = r.initial_config(&x).unwrap();

    let trace = fair_run(&r, &c0, 42, 10_000, ExploreOptions::default()).unwrap();
    for c in trace.configs() {
        println!("{}", r.display(c));
    }
    println!("converged: {}, output {:?}", trace.converged, trace.output);
    println!("verdict: {}", verdict(&p, &x, ExploreOptions::default()).unwrap());
}
