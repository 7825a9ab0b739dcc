//! Add mirror states to an immediate transmission protocol, remove them
//! again, and confirm the verdicts never change.

use popverify::library::build_simple_threshold;
use popverify::transforms::{io_add_mirrors, io_remove_mirrors};
use popverify::verifier::{enumerate_inputs, verdict, ExploreOptions};

fn main() {
    let alphabet = vec!["a".to_string(), "b".to_string()];
    let p = build_simple_threshold("a", 2, &alphabet).unwrap();
    let added = io_add_mirrors(&p).unwrap();
    let back = io_remove_mirrors(&added).unwrap();
    println!("states: {:?}", added.states);
    for x in enumerate_inputs(2, 3, 4) {
        let v = [&p, &added, &back].map(|q| verdict(q, &x, ExploreOptions::default()).unwrap().to_string());
        println!("{}: {}", x.display_with(&p.inputs), v.join(" | "));
    }
}
