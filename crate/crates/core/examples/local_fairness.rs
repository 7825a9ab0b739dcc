//! Set union under local fairness: each agent ends with the set of all
//! input symbols within one round per symbol.

use popverify::library::build_set_union;
use popverify::semilinear::Profile;
use popverify::verifier::local_fair_run;

fn main() {
    let symbols: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let p = build_set_union(&symbols, |bits| bits[0] && !bits[2]).unwrap();
    for input in ["{a:2}", "{a:1, b:3}", "{a:1, c:1}", "{b:1, c:4}"] {
        let x = Profile::parse(input).unwrap();
        let run = local_fair_run(&p, &x, 1, 16);
        println!(
            "{x}: {} rounds, sets {:?}, output {:?}",
            run.rounds,
            p.set_names(run.states[0]),
            run.output
        );
    }
}
