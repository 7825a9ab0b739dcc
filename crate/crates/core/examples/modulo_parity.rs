//! Token-passing modulo protocol: odd number of `a`, and `a + 2b = 0 mod 3`.

use popverify::library::{build_modulo, ModuloParams};
use popverify::semilinear::parse_predicate;
use popverify::verifier::{sweep, SweepOptions};

fn main() {
    let cases = [
        (ModuloParams::new([("a", 1)], 1, 2).unwrap(), "(mod (v (a 1)) 1 2)"),
        (ModuloParams::new([("a", 1), ("b", 2)], 0, 3).unwrap(), "(mod (v (a 1) (b 2)) 0 3)"),
    ];
    for (params, psi) in cases {
        let p = build_modulo(&params).unwrap();
        let psi = parse_predicate(psi).unwrap();
        let report = sweep(&p, &psi, &SweepOptions::up_to(5)).unwrap();
        println!("{psi}: {} states, {} inputs, clean = {}", p.states.len(), report.checked(), report.is_clean());
    }
}
