//! Minimal unstable configurations of the parity protocol, the truncation
//! bound they induce, and the stability of a few configurations next to
//! their truncations.

use popverify::library::{build_modulo, ModuloParams};
use popverify::verifier::{minimal_unstable, ExploreOptions};

fn main() {
    let p = build_modulo(&ModuloParams::new([("a", 1)], 1, 2).unwrap()).unwrap();
    let r = p.compile().unwrap();
    let m = minimal_unstable(&r, 4, ExploreOptions::default()).unwrap();
    println!("k = {}", m.k);
    for c in &m.minimal {
        println!("minimal unstable: {}", r.display(c));
    }
    let mut sample: Vec<_> = m.labels.keys().filter(|c| c.max_multiplicity() > m.k).collect();
    sample.sort();
    for c in sample.into_iter().take(6) {
        let t = c.truncate(m.k);
        println!("{} {:?}  ~  {} {:?}", r.display(c), m.labels[c], r.display(&t), m.labels[&t]);
    }
}
