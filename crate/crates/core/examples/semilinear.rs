//! Predicates as expressions and as explicit semilinear sets, checked for
//! agreement on a box.

use popverify::semilinear::{brute_equivalent, parse_predicate, Profile};

fn main() {
    let set = parse_predicate(
        "(member (symbols x y)
           (linear (base 1 0) (period 2 1) (period 0 1))
           (linear (base 0 2) (period 2 0)))",
    )
    .unwrap();
    let formula = parse_predicate(
        "(or (and (mod (v (x 1)) 1 2) (ge (v (x -1) (y 2)) -1))
             (and (mod (v (x 1)) 0 2) (ge (v (y 1)) 2) (not (ge (v (y 1)) 3))))",
    )
    .unwrap();
    let symbols = vec!["x".to_string(), "y".to_string()];
    let eq = brute_equivalent(&set, &formula, &symbols, 10);
    println!("{set}\n{formula}\nequivalent on {} points: {}", eq.checked, eq.equivalent);

    let x = Profile::parse("{x:3, y:1}").unwrap();
    println!("{x}: set {}, formula {}", set.eval(&x), formula.eval(&x));
}
