//! Simulate a two-way protocol with queued transmission and compare
//! verdicts input by input, bounding messages in transit by the population.

use popverify::library::{build_modulo, ModuloParams};
use popverify::transforms::two_way_to_queued;
use popverify::verifier::{enumerate_inputs, verdict, ExploreOptions, TransitCap};

fn main() {
    let p = build_modulo(&ModuloParams::new([("a", 1)], 1, 2).unwrap()).unwrap();
    let cert = two_way_to_queued(&p).unwrap();
    println!(
        "{} states / {} messages -> {} states / {} messages",
        p.states.len(),
        p.messages.len(),
        cert.target.states.len(),
        cert.target.messages.len()
    );
    for x in enumerate_inputs(1, 1, 4) {
        let a = verdict(&p, &x, ExploreOptions::default()).unwrap();
        let b = verdict(&cert.target, &x, ExploreOptions::with_cap(TransitCap::Population)).unwrap();
        println!("{}: two-way {a}, queued {b}", x.display_with(&p.inputs));
    }
}
