//! Overlap coefficients of the level-to-level unitary map.
//!
//! The map from level `i` to level `i + 1` has entries `U[r][α] = a[|r ∩ α|]`,
//! so it is fixed by `i + 1` real numbers. Orthonormality of its columns gives
//! one normalization equation and one orthogonality equation per possible
//! overlap `p < i` between two distinct columns; those `i + 1` quadratic
//! equations are solved here by damped Newton iteration. Among the roots, the
//! one closest in Frobenius norm to the ideal superset map is kept, which is
//! the polar factor of the ideal map.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::lattice::{n_k, n_pjk, MAX_ITEMS};
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 200;
const MULTI_STARTS: usize = 64;

/// Coefficients `a_0..=a_i` of the map from level `i` to `i + 1` over `n` items.
#[derive(Clone, Debug, PartialEq)]
pub struct MapCoefficients<T> {
    n: usize,
    level: usize,
    a: Vec<T>,
}

impl<T: Real> MapCoefficients<T> {
    /// Wraps raw coefficients without checking the orthonormality residuals.
    pub fn from_raw(n: usize, level: usize, a: Vec<T>) -> Result<Self> {
        if a.len() != level + 1 {
            return Err(Error::Domain(format!(
                "expected {} coefficients for level {level}, got {}",
                level + 1,
                a.len()
            )));
        }
        check_level(n, level)?;
        Ok(MapCoefficients { n, level, a })
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// `a[k]` is the amplitude routed between sets overlapping in `k` items.
    pub fn a(&self) -> &[T] {
        &self.a
    }

    /// Squared Frobenius distance to the ideal map, per source column:
    /// `Σ_k n_k (a_k - [k = i])²`.
    pub fn ideal_gap(&self) -> T {
        gap(&counts(self.n, self.level), &self.a, self.level)
    }

    /// Coefficients cast to another scalar type.
    pub fn cast<U: Real>(&self) -> MapCoefficients<U> {
        MapCoefficients {
            n: self.n,
            level: self.level,
            a: self.a.iter().map(|&x| U::from_f64_lossy(x.to_f64_lossy())).collect(),
        }
    }
}

/// Residuals of the orthonormality equations.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals<T> {
    /// `|Σ_k n_k a_k² − 1|`
    pub normalization: T,
    /// `|Σ_{j,k} n^(p)_{jk} a_j a_k|` for `p = 0..i`
    pub orthogonality: Vec<T>,
}

impl<T: Real> Residuals<T> {
    pub fn orthogonality_max(&self) -> T {
        self.orthogonality.iter().fold(T::zero(), |m, &r| m.max(r))
    }

    pub fn max(&self) -> T {
        self.normalization.max(self.orthogonality_max())
    }
}

pub fn residuals<T: Real>(c: &MapCoefficients<T>) -> Residuals<T> {
    let system = System::<T>::new(c.n, c.level);
    let f = system.eval(&c.a);
    Residuals {
        normalization: f[0].abs(),
        orthogonality: f[1..].iter().map(|r| r.abs()).collect(),
    }
}

/// Scaled values `b_k = (−1)^k a_{i−k} √n_{i−k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledCoefficients<T> {
    pub b: Vec<T>,
}

pub fn scaled_b<T: Real>(c: &MapCoefficients<T>) -> ScaledCoefficients<T> {
    let i = c.level;
    let b = (0..=i)
        .map(|k| {
            let sign = if k % 2 == 0 { T::one() } else { -T::one() };
            sign * c.a[i - k] * T::from_u64_exact(n_k(c.n, i, i - k)).sqrt()
        })
        .collect();
    ScaledCoefficients { b }
}

fn check_level(n: usize, level: usize) -> Result<()> {
    if n > MAX_ITEMS {
        return Err(Error::TooManyItems(n));
    }
    // C(n, i) <= C(n, i + 1) exactly when i + 1 <= ceil(n / 2).
    if level + 1 > n.div_ceil(2) {
        return Err(Error::LevelRestriction { n, level });
    }
    Ok(())
}

fn counts<T: Real>(n: usize, i: usize) -> Vec<T> {
    (0..=i).map(|k| T::from_u64_exact(n_k(n, i, k))).collect()
}

fn gap<T: Real>(nk: &[T], a: &[T], i: usize) -> T {
    a.iter()
        .zip(nk)
        .enumerate()
        .map(|(k, (&ak, &n))| {
            let d = if k == i { ak - T::one() } else { ak };
            n * d * d
        })
        .fold(T::zero(), |s, x| s + x)
}

/// The quadratic system: row 0 is normalization, row `p + 1` is the
/// orthogonality condition for column pairs overlapping in `p` items.
struct System<T> {
    nk: Vec<T>,
    npjk: Vec<Vec<Vec<T>>>,
}

impl<T: Real> System<T> {
    fn new(n: usize, i: usize) -> Self {
        let npjk = (0..i)
            .map(|p| {
                (0..=i)
                    .map(|j| (0..=i).map(|k| T::from_u64_exact(n_pjk(n, i, p, j, k))).collect())
                    .collect()
            })
            .collect();
        System { nk: counts(n, i), npjk }
    }

    fn dim(&self) -> usize {
        self.nk.len()
    }

    fn eval(&self, a: &[T]) -> Vec<T> {
        let mut f = Vec::with_capacity(self.dim());
        f.push(self.nk.iter().zip(a).fold(T::zero(), |s, (&n, &x)| s + n * x * x) - T::one());
        for table in &self.npjk {
            let mut s = T::zero();
            for (j, row) in table.iter().enumerate() {
                for (k, &c) in row.iter().enumerate() {
                    s += c * a[j] * a[k];
                }
            }
            f.push(s);
        }
        f
    }

    fn jacobian(&self, a: &[T]) -> Vec<Vec<T>> {
        let two = T::one() + T::one();
        let mut jac = Vec::with_capacity(self.dim());
        jac.push(self.nk.iter().zip(a).map(|(&n, &x)| two * n * x).collect());
        for table in &self.npjk {
            // tables are symmetric in (j, k)
            let row = (0..self.dim())
                .map(|m| two * table[m].iter().zip(a).fold(T::zero(), |s, (&c, &x)| s + c * x))
                .collect();
            jac.push(row);
        }
        jac
    }
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Gaussian elimination with partial pivoting. `None` when singular.
fn solve_linear<T: Real>(mut m: Vec<Vec<T>>, mut rhs: Vec<T>) -> Option<Vec<T>> {
    let dim = rhs.len();
    for col in 0..dim {
        let pivot = (col..dim).max_by(|&x, &y| {
            m[x][col]
                .abs()
                .partial_cmp(&m[y][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() <= T::epsilon() * T::from_f64_lossy(1e-3) || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..dim {
            let factor = m[row][col] / m[col][col];
            if factor == T::zero() {
                continue;
            }
            let (upper, lower) = m.split_at_mut(row);
            for (dst, &src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *dst -= factor * src;
            }
            let v = rhs[col];
            rhs[row] -= factor * v;
        }
    }
    let mut x = vec![T::zero(); dim];
    for row in (0..dim).rev() {
        let mut s = rhs[row];
        for c in row + 1..dim {
            s -= m[row][c] * x[c];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Damped Newton from `start`. Returns the root and its residual max-norm on
/// convergence.
fn newton<T: Real>(system: &System<T>, start: Vec<T>) -> std::result::Result<Vec<T>, T> {
    let tol = T::solver_tolerance();
    let half = T::from_f64_lossy(0.5);
    let mut a = start;
    let mut f = system.eval(&a);
    let mut res = max_abs(&f);
    for _ in 0..MAX_ITERATIONS {
        if res <= tol {
            return Ok(a);
        }
        let neg_f: Vec<T> = f.iter().map(|&x| -x).collect();
        let Some(step) = solve_linear(system.jacobian(&a), neg_f) else {
            return Err(res);
        };
        let norm2 = |v: &[T]| v.iter().fold(T::zero(), |s, &x| s + x * x);
        let current = norm2(&f);
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<T> = a.iter().zip(&step).map(|(&x, &d)| x + t * d).collect();
            let ft = system.eval(&trial);
            if norm2(&ft) < current || max_abs(&ft) <= tol {
                a = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= half;
        }
        if !accepted {
            // stalled at roundoff level; accept if already good enough
            return if res <= T::acceptance_tolerance() {
                Ok(a)
            } else {
                Err(res)
            };
        }
        res = max_abs(&f);
    }
    if res <= tol {
        Ok(a)
    } else {
        Err(res)
    }
}

/// Deterministic perturbation in `[-1, 1)` used by the multi-start fallback.
fn jitter(state: &mut u64) -> f64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    ((*state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

/// Solves for the map coefficients from level `i` to `i + 1` over `n` items.
pub fn solve_coefficients<T: Real>(n: usize, i: usize) -> Result<MapCoefficients<T>> {
    check_level(n, i)?;
    let system = System::<T>::new(n, i);
    let ideal_start = |scale: f64| -> Vec<T> {
        let mut a = vec![T::zero(); i + 1];
        a[i] = T::from_f64_lossy(scale / ((n - i) as f64).sqrt());
        a
    };

    let mut roots = Vec::new();
    let mut best_residual = f64::INFINITY;
    match newton(&system, ideal_start(1.0)) {
        Ok(root) => roots.push(root),
        Err(r) => best_residual = best_residual.min(r.to_f64_lossy()),
    }
    if roots.is_empty() {
        let mut rng_state = 0x5eed_u64 ^ ((n as u64) << 8) ^ i as u64;
        for attempt in 0..MULTI_STARTS {
            let amplitude = 0.05 * (1 + attempt / 8) as f64;
            let mut start = ideal_start(1.0);
            for (k, x) in start.iter_mut().enumerate() {
                let sign = if (i - k).is_multiple_of(2) { 1.0 } else { -1.0 };
                let scale = (n_k(n, i, k) as f64).sqrt().max(1.0);
                *x += T::from_f64_lossy(sign * amplitude * jitter(&mut rng_state).abs() / scale);
            }
            match newton(&system, start) {
                Ok(root) => roots.push(root),
                Err(r) => best_residual = best_residual.min(r.to_f64_lossy()),
            }
        }
    }

    let nk = counts::<T>(n, i);
    let best = roots
        .into_iter()
        .map(|mut a| {
            if a[i] < T::zero() {
                a.iter_mut().for_each(|x| *x = -*x);
            }
            a
        })
        .min_by(|x, y| {
            gap(&nk, x, i)
                .partial_cmp(&gap(&nk, y, i))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or(Error::NoConvergence {
            n,
            level: i,
            residual: best_residual,
        })?;

    let coeffs = MapCoefficients { n, level: i, a: best };
    let res = residuals(&coeffs).max();
    if res > T::acceptance_tolerance() || coeffs.a[i] <= T::zero() {
        return Err(Error::NoConvergence {
            n,
            level: i,
            residual: res.to_f64_lossy(),
        });
    }
    Ok(coeffs)
}

/// Roots reached from the perturbed multi-start points, regardless of whether
/// the ideal start converged. Used to audit root selection.
pub fn multistart_roots<T: Real>(n: usize, i: usize) -> Result<Vec<MapCoefficients<T>>> {
    check_level(n, i)?;
    let system = System::<T>::new(n, i);
    let mut rng_state = 0xa0d1_u64 ^ ((n as u64) << 8) ^ i as u64;
    let mut out = Vec::new();
    for attempt in 0..MULTI_STARTS {
        let amplitude = 0.5 * (1 + attempt / 16) as f64;
        let start = (0..=i)
            .map(|_| T::from_f64_lossy(amplitude * jitter(&mut rng_state) / ((n - i) as f64).sqrt()))
            .collect();
        if let Ok(mut a) = newton(&system, start) {
            if a[i] < T::zero() {
                a.iter_mut().for_each(|x| *x = -*x);
            }
            out.push(MapCoefficients { n, level: i, a });
        }
    }
    Ok(out)
}

/// Thread-safe cache of solved coefficients keyed by `(n, i)`.
///
/// Populate with [`CoefficientCache::populate`] before fanning out; lookups
/// afterwards only take the read lock.
type Store<T> = HashMap<(usize, usize), Arc<MapCoefficients<T>>>;

#[derive(Debug, Default)]
pub struct CoefficientCache<T> {
    inner: RwLock<Store<T>>,
}

impl<T: Real> CoefficientCache<T> {
    pub fn new() -> Self {
        CoefficientCache {
            inner: RwLock::new(HashMap::new()),
        }
    }

    pub fn get(&self, n: usize, i: usize) -> Result<Arc<MapCoefficients<T>>> {
        if let Some(c) = self.inner.read().expect("cache lock").get(&(n, i)) {
            return Ok(Arc::clone(c));
        }
        let solved = Arc::new(solve_coefficients::<T>(n, i)?);
        let mut guard = self.inner.write().expect("cache lock");
        Ok(Arc::clone(guard.entry((n, i)).or_insert(solved)))
    }

    /// Solves every level map from `from` up to (excluding) `to`.
    pub fn populate(&self, n: usize, from: usize, to: usize) -> Result<()> {
        for i in from..to {
            self.get(n, i)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_items_level_one() {
        let c = solve_coefficients::<f64>(3, 1).unwrap();
        assert!((c.a()[0] + 1.0 / 3.0).abs() < 1e-12);
        assert!((c.a()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn three_items_level_zero() {
        let c = solve_coefficients::<f64>(3, 0).unwrap();
        assert!((c.a()[0] - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn level_restriction() {
        assert!(matches!(
            solve_coefficients::<f64>(4, 2),
            Err(Error::LevelRestriction { n: 4, level: 2 })
        ));
        assert!(solve_coefficients::<f64>(5, 2).is_ok());
        assert!(matches!(solve_coefficients::<f64>(25, 1), Err(Error::TooManyItems(25))));
    }

    #[test]
    fn residuals_of_exact_values() {
        let c = MapCoefficients::<f64>::from_raw(3, 1, vec![-1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert!(residuals(&c).max() <= 1e-15);
    }

    #[test]
    fn residual_first_order_perturbation() {
        let h = 1e-3;
        let c = MapCoefficients::<f64>::from_raw(3, 1, vec![-1.0 / 3.0, 2.0 / 3.0 + h]).unwrap();
        // n_1 = 2, so the first-order change is 2 * n_1 * a_1 * h
        let first_order = 2.0 * 2.0 * (2.0 / 3.0) * h;
        let r = residuals(&c).normalization;
        assert!(
            (r - first_order).abs() < 2.0 * 2.0 * h * h + 1e-15,
            "{r} vs {first_order}"
        );
        assert!((r - 2.7e-3).abs() < 1e-4);
    }

    #[test]
    fn zero_coefficients() {
        let c = MapCoefficients::<f64>::from_raw(6, 2, vec![0.0; 3]).unwrap();
        let r = residuals(&c);
        assert_eq!(r.normalization, 1.0);
        assert_eq!(r.orthogonality_max(), 0.0);
    }

    #[test]
    fn scaled_values() {
        let c = solve_coefficients::<f64>(3, 1).unwrap();
        let b = scaled_b(&c).b;
        assert!((b[0] - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-12);
        assert!((b[1] - 1.0 / 3.0).abs() < 1e-12);
        for n in 2usize..=24 {
            for i in 0..n.div_ceil(2) {
                let c = solve_coefficients::<f64>(n, i).unwrap();
                let b = scaled_b(&c).b;
                let s: f64 = b.iter().map(|x| x * x).sum();
                assert!((s - 1.0).abs() < 1e-12, "n={n} i={i}");
                assert!(b[0] > 0.0 && b[0] <= 1.0);
                assert!((b[0] - c.a()[i] * ((n - i) as f64).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn b0_near_one_and_decreasing_for_ten_items() {
        let b0: Vec<f64> = (2..=4)
            .map(|i| scaled_b(&solve_coefficients::<f64>(10, i).unwrap()).b[0])
            .collect();
        assert!(b0.iter().all(|&b| b > 0.9 && b < 1.0), "{b0:?}");
        assert!(b0.windows(2).all(|w| w[1] < w[0]), "{b0:?}");
    }

    #[test]
    fn residuals_small_for_all_levels() {
        for n in 1usize..=24 {
            for i in 0..n.div_ceil(2) {
                let c = solve_coefficients::<f64>(n, i).unwrap();
                let r = residuals(&c);
                assert!(r.max() <= 1e-10, "n={n} i={i} residual {:e}", r.max());
                assert!(c.a()[i] > 0.0);
            }
        }
    }

    #[test]
    fn ideal_start_root_beats_multistart_roots() {
        for n in [6usize, 11, 16, 20, 24] {
            for i in 0..n.div_ceil(2) {
                let chosen = solve_coefficients::<f64>(n, i).unwrap();
                for other in multistart_roots::<f64>(n, i).unwrap() {
                    assert!(chosen.ideal_gap() <= other.ideal_gap() + 1e-9, "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn single_precision_agrees() {
        for n in 3usize..=16 {
            for i in 0..n.div_ceil(2) {
                let lo = solve_coefficients::<f32>(n, i).unwrap();
                let hi = solve_coefficients::<f64>(n, i).unwrap();
                for (x, y) in lo.a().iter().zip(hi.a()) {
                    assert!((f64::from(*x) - y).abs() < 1e-5, "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn cache_reuses_entries() {
        let cache = CoefficientCache::<f64>::new();
        cache.populate(10, 2, 5).unwrap();
        assert_eq!(cache.len(), 3);
        let a = cache.get(10, 3).unwrap();
        let b = cache.get(10, 3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 3);
    }
}
