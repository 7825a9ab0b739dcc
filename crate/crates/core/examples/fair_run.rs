//! Random fair executions of the k = 2 tower from a protocol file given on
//! the command line (default: the shipped one).

use popverify::parse_protocol;
use popverify::verifier::{fair_run, ExploreOptions};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/protocols/tower_a2.pp").to_string());
    let p = parse_protocol(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let r = p.compile().unwrap();
    let x = p.parse_input("{a:2, b:3}").unwrap();
    let c0 = r.initial_config(&x).unwrap();
    for seed in 0..3 {
        let t = fair_run(&r, &c0, seed, 1_000, ExploreOptions::default()).unwrap();
        let last = t.configs().last().unwrap();
        println!("seed {seed}: {} steps, ends in {} with output {:?}", t.steps.len(), r.display(last), t.output);
    }
}
