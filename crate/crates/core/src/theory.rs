//! Ensemble predictions for random problems with nogoods at level 2.

use crate::error::{Error, Result};
use crate::lattice::choose;
use crate::scalar::Real;

/// Binary entropy in nats, `−x ln x − (1 − x) ln(1 − x)`, extended by
/// continuity to the endpoints.
pub fn entropy_h<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::Domain(format!("entropy argument {x} outside [0, 1]")));
    }
    let term = |p: T| if p > T::zero() { -p * p.ln() } else { T::zero() };
    Ok(term(x) + term(T::one() - x))
}

/// Probability that a fixed `l`-set survives `m` nogoods drawn uniformly
/// without replacement from all pairs:
/// `C(C(n,2) − C(l,2), m) / C(C(n,2), m)`.
pub fn rho_l<T: Real>(n: usize, l: usize, m: usize) -> Result<T> {
    let pairs = choose(n as i64, 2);
    let inside = choose(l as i64, 2);
    if l > n {
        return Err(Error::Domain(format!("solution level {l} exceeds item count {n}")));
    }
    let outside = pairs - inside;
    if m as u64 > outside {
        return Err(Error::Domain(format!(
            "m = {m} exceeds the {outside} pairs outside a solution"
        )));
    }
    // product of (outside − j) / (pairs − j), j = 0..m
    let mut rho = T::one();
    for j in 0..m as u64 {
        rho *= T::from_u64_exact(outside - j) / T::from_u64_exact(pairs - j);
    }
    Ok(rho)
}

/// Expected number of solutions, `C(n, l) · ρ_l`.
pub fn expected_solutions<T: Real>(n: usize, l: usize, m: usize) -> Result<T> {
    Ok(T::from_u64_exact(choose(n as i64, l as i64)) * rho_l::<T>(n, l, m)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleParams<T> {
    /// values per variable
    pub b: T,
    /// nogood density m / N
    pub beta: T,
    pub n: usize,
}

impl<T: Real> EnsembleParams<T> {
    pub fn new(b: T, beta: T, n: usize) -> Result<Self> {
        check_b(b)?;
        if beta.is_nan() || beta < T::zero() {
            return Err(Error::Domain(format!("beta must be non-negative, got {beta}")));
        }
        Ok(EnsembleParams { b, beta, n })
    }
}

fn check_b<T: Real>(b: T) -> Result<()> {
    if b >= T::from_f64_lossy(2.0) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "values per variable must be at least 2, got {b}"
        )))
    }
}

/// Per-item growth rate of `ln N_soln` for large `N` with `L = N / b`.
pub fn solution_rate<T: Real>(b: T, beta: T) -> Result<T> {
    check_b(b)?;
    Ok(entropy_h(b.recip())? + beta * (T::one() - (b * b).recip()).ln())
}

/// `ln N_soln ≈ N (h(1/b) + β ln(1 − 1/b²))`.
pub fn ln_nsoln_asymptotic<T: Real>(params: &EnsembleParams<T>) -> Result<T> {
    Ok(T::from_usize(params.n).expect("n") * solution_rate(params.b, params.beta)?)
}

/// Density where the expected solution count crosses one:
/// `−h(1/b) / ln(1 − 1/b²)`.
pub fn beta_crit<T: Real>(b: T) -> Result<T> {
    check_b(b)?;
    Ok(-entropy_h(b.recip())? / (T::one() - (b * b).recip()).ln())
}

/// Upper edge of the polynomial-cost regime:
/// `((1 − b²) / (2b)) ln(1 / (b − 1))`, evaluated as `((b² − 1) / (2b)) ln(b − 1)`.
pub fn beta_poly<T: Real>(b: T) -> Result<T> {
    check_b(b)?;
    let two = T::from_f64_lossy(2.0);
    Ok((b * b - T::one()) / (two * b) * (b - T::one()).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;

    fn big_binom(n: u64, k: u64) -> BigUint {
        if k > n {
            return BigUint::from(0u32);
        }
        let mut acc = BigUint::from(1u32);
        for j in 0..k {
            acc = acc * BigUint::from(n - j) / BigUint::from(j + 1);
        }
        acc
    }

    #[test]
    fn entropy_values() {
        assert!((entropy_h(0.5f64).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy_h(0.0f64).unwrap(), 0.0);
        assert_eq!(entropy_h(1.0f64).unwrap(), 0.0);
        // series: ln 4 − (3/4) ln 3
        let series = 4f64.ln() - 0.75 * 3f64.ln();
        assert!((entropy_h(0.25f64).unwrap() - series).abs() < 1e-15);
        assert!((entropy_h(0.25f64).unwrap() - 0.5623).abs() < 1e-4);
        assert!(entropy_h(1.5f64).is_err());
        assert!(entropy_h(f64::NAN).is_err());
    }

    #[test]
    fn rho_examples() {
        assert!((rho_l::<f64>(4, 2, 1).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(rho_l::<f64>(10, 5, 0).unwrap(), 1.0);
        assert!(rho_l::<f64>(10, 5, 36).is_err());
        assert!(rho_l::<f64>(10, 5, 35).unwrap() > 0.0);
    }

    #[test]
    fn rho_matches_exact_rationals() {
        for n in 2..=16usize {
            for l in 2..=n {
                let pairs = (n * (n - 1) / 2) as u64;
                let outside = pairs - (l * (l - 1) / 2) as u64;
                for m in 0..=40usize.min(outside as usize) {
                    let exact =
                        BigRational::new(big_binom(outside, m as u64).into(), big_binom(pairs, m as u64).into());
                    let exact = exact.to_f64().unwrap();
                    let approx = rho_l::<f64>(n, l, m).unwrap();
                    assert!(
                        (approx - exact).abs() <= 1e-12 * exact.max(f64::MIN_POSITIVE),
                        "n={n} l={l} m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn critical_density() {
        let b2 = beta_crit(2.0f64).unwrap();
        assert!((b2 - 2.4094).abs() < 1e-4);
        assert!((ln_nsoln_asymptotic(&EnsembleParams::new(2.0, b2, 10).unwrap()).unwrap()).abs() < 1e-12);
        assert!((beta_crit(3.0f64).unwrap() - 5.40).abs() < 0.005);
        let sweep: Vec<f64> = (2..=6).map(|b| beta_crit(b as f64).unwrap()).collect();
        assert!(sweep.windows(2).all(|w| w[1] > w[0]));
        assert!(beta_crit(1.5f64).is_err());
    }

    /// Independent bisection on the rate function.
    fn bisect_root(b: f64) -> f64 {
        let f = |beta: f64| solution_rate(b, beta).unwrap();
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn critical_density_is_the_rate_zero() {
        for b in 2..=6 {
            let b = b as f64;
            assert!((beta_crit(b).unwrap() - bisect_root(b)).abs() < 1e-9);
        }
    }

    #[test]
    fn asymptotic_counts() {
        let free = ln_nsoln_asymptotic(&EnsembleParams::new(2.0f64, 0.0, 10).unwrap()).unwrap();
        assert!((free - 10.0 * 2f64.ln()).abs() < 1e-12);
        // the exact per-item rate ln C(N, N/2) / N approaches ln 2 from below
        let exact: Vec<f64> = [10u64, 20, 40, 60]
            .iter()
            .map(|&n| (big_binom(n, n / 2).to_f64().unwrap()).ln() / n as f64)
            .collect();
        assert!(exact.windows(2).all(|w| w[1] > w[0]));
        assert!(exact.iter().all(|&r| r < 2f64.ln()));
        assert!(2f64.ln() - exact[3] < 0.05);
        let over = ln_nsoln_asymptotic(&EnsembleParams::new(2.0f64, 4.0, 10).unwrap()).unwrap();
        assert!(over < 0.0);
        assert!(EnsembleParams::new(2.0f64, -1.0, 10).is_err());
    }

    #[test]
    fn polynomial_edge() {
        assert_eq!(beta_poly(2.0f64).unwrap(), 0.0);
        assert!(beta_poly(2.0f64).unwrap().is_sign_positive());
        assert!((beta_poly(3.0f64).unwrap() - (-8.0 / 6.0) * 0.5f64.ln()).abs() < 1e-15);
        assert!((beta_poly(3.0f64).unwrap() - 0.924).abs() < 1e-3);
        for b in 3..=6 {
            let b = b as f64;
            assert!(beta_poly(b).unwrap() < beta_crit(b).unwrap());
        }
    }
}
