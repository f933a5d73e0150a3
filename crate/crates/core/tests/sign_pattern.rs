//! Records whether the map coefficients alternate in sign. Only the
//! convention `a_i > 0` is asserted; run with `--nocapture` to see the log.

use qlattice::coefficients::{scaled_b, solve_coefficients};

fn alternates(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] * w[1] < 0.0)
}

fn same_sign(v: &[f64]) -> bool {
    v.iter().all(|&x| x > 0.0) || v.iter().all(|&x| x < 0.0)
}

#[test]
fn log_sign_pattern() {
    let mut a_count = 0;
    let mut b_count = 0;
    let mut total = 0;
    for n in 2..=24usize {
        for i in 1..n.div_ceil(2) {
            let c = solve_coefficients::<f64>(n, i).unwrap();
            assert!(c.a()[i] > 0.0, "N={n} i={i}");
            let b = scaled_b(&c);
            let (sa, sb) = (alternates(c.a()), same_sign(&b.b));
            a_count += sa as usize;
            b_count += sb as usize;
            total += 1;
            if !sa || !sb {
                println!("N={n} i={i} a_alternates={sa} b_same_sign={sb}");
            }
        }
    }
    println!("a alternates in sign for {a_count}/{total} maps with i >= 1; b keeps one sign for {b_count}/{total}");
}
