//! Amplitude-level simulation of the lattice search.
//!
//! A run puts equal amplitude on the good sets of a start level, then for
//! each level up to `L − 1` multiplies nogood amplitudes by a unit phase and
//! applies the level map `ψ'(r) = Σ_k a_k Σ_{|r ∩ α| = k} ψ(α)`. The
//! probability of a solution is the squared amplitude left on good sets at
//! level `L`.
//!
//! Two evaluations of the level map are provided. [`apply_map`] is the direct
//! double sum over both levels. [`apply_map_fast`] rewrites the overlap sum
//! through subset transforms on the full `2^N` cube: with
//! `g(T) = Σ_{α ⊇ T} ψ(α)` and `c_t = Σ_k (−1)^{t−k} C(t, k) a_k`,
//! `ψ'(r) = Σ_{T ⊆ r} c_{|T|} g(T)`, which costs `O(N 2^N)` per level.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{AddAssign, Mul, Neg, SubAssign};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::coefficients::{CoefficientCache, MapCoefficients};
use crate::error::{Error, Result};
use crate::lattice::{choose, ItemSet, Level, MAX_ITEMS};
use crate::problems::{NogoodTable, Problem};
use crate::scalar::Real;

/// Element type of an amplitude vector: a real or complex float.
pub trait Amplitude:
    Copy + Zero + AddAssign + SubAssign + Neg<Output = Self> + Mul<Self::Real, Output = Self> + Send + Sync + fmt::Debug
{
    type Real: Real;

    fn from_real(x: Self::Real) -> Self;

    fn norm_sqr(&self) -> Self::Real;

    /// `self · e^{iθ}`, or `None` when the type cannot carry a phase.
    fn rotated(self, theta: Self::Real) -> Option<Self>;

    fn to_complex64(self) -> Complex<f64>;
}

macro_rules! real_amplitude {
    ($t:ty) => {
        impl Amplitude for $t {
            type Real = $t;

            fn from_real(x: $t) -> Self {
                x
            }

            fn norm_sqr(&self) -> $t {
                self * self
            }

            fn rotated(self, _theta: $t) -> Option<Self> {
                None
            }

            fn to_complex64(self) -> Complex<f64> {
                Complex::new(self as f64, 0.0)
            }
        }

        impl Amplitude for Complex<$t> {
            type Real = $t;

            fn from_real(x: $t) -> Self {
                Complex::new(x, 0.0)
            }

            fn norm_sqr(&self) -> $t {
                Complex::norm_sqr(self)
            }

            fn rotated(self, theta: $t) -> Option<Self> {
                Some(self * Complex::from_polar(1.0, theta))
            }

            fn to_complex64(self) -> Complex<f64> {
                Complex::new(self.re as f64, self.im as f64)
            }
        }
    };
}

real_amplitude!(f32);
real_amplitude!(f64);

/// Anything that can say whether a set (as a bit mask) is nogood.
pub trait Classifier {
    fn is_nogood(&self, mask: u32) -> bool;
}

impl Classifier for Problem {
    fn is_nogood(&self, mask: u32) -> bool {
        !self.is_good(ItemSet::from_bits(mask))
    }
}

impl Classifier for NogoodTable {
    fn is_nogood(&self, mask: u32) -> bool {
        NogoodTable::is_nogood(self, mask)
    }
}

/// Amplitudes of all sets at one level, indexed by rank.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeState<A> {
    n: usize,
    level: usize,
    amps: Vec<A>,
}

impl<A: Amplitude> AmplitudeState<A> {
    pub fn zeros(n: usize, level: usize) -> Result<Self> {
        let size = Level::new(n, level)?.size();
        Ok(AmplitudeState {
            n,
            level,
            amps: vec![A::zero(); size],
        })
    }

    pub fn from_amplitudes(n: usize, level: usize, amps: Vec<A>) -> Result<Self> {
        let size = Level::new(n, level)?.size();
        if amps.len() != size {
            return Err(Error::Domain(format!(
                "level ({n}, {level}) has {size} sets, got {} amplitudes",
                amps.len()
            )));
        }
        Ok(AmplitudeState { n, level, amps })
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn amplitudes(&self) -> &[A] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [A] {
        &mut self.amps
    }

    /// Amplitude of `s`, which must be a set at this level.
    pub fn amplitude(&self, s: ItemSet) -> A {
        debug_assert_eq!(s.level(), self.level);
        self.amps[s.rank() as usize]
    }

    pub fn norm_sqr(&self) -> A::Real {
        self.amps.iter().fold(A::Real::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn norm(&self) -> A::Real {
        self.norm_sqr().sqrt()
    }

    pub fn to_complex64(&self) -> AmplitudeState<Complex<f64>> {
        AmplitudeState {
            n: self.n,
            level: self.level,
            amps: self.amps.iter().map(|a| a.to_complex64()).collect(),
        }
    }

    /// Largest entrywise modulus difference.
    pub fn max_abs_diff<B: Amplitude>(&self, other: &AmplitudeState<B>) -> f64 {
        assert_eq!((self.n, self.level), (other.n, other.level));
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(x, y)| (x.to_complex64() - y.to_complex64()).norm())
            .fold(0.0, f64::max)
    }
}

/// How nogood amplitudes are rephased at each level. Goods are left alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhasePolicy<T> {
    /// Multiply by −1.
    Inversion,
    /// Multiply by `e^{iθ}`, θ uniform on `[0, 2π)`, fresh per set and level.
    RandomUniform,
    /// Multiply by `e^{iθ}` for a fixed θ.
    FixedAngle(T),
    None,
}

impl<T> PhasePolicy<T> {
    pub fn is_random(&self) -> bool {
        matches!(self, PhasePolicy::RandomUniform)
    }

    /// True when amplitudes stay real throughout a run.
    pub fn is_real(&self) -> bool {
        matches!(self, PhasePolicy::Inversion | PhasePolicy::None)
    }
}

impl<T: fmt::Display> fmt::Display for PhasePolicy<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhasePolicy::Inversion => f.write_str("inversion"),
            PhasePolicy::RandomUniform => f.write_str("random"),
            PhasePolicy::FixedAngle(theta) => write!(f, "fixed:{theta}"),
            PhasePolicy::None => f.write_str("none"),
        }
    }
}

impl<T: Real> FromStr for PhasePolicy<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inversion" | "invert" => Ok(PhasePolicy::Inversion),
            "random" | "random-uniform" => Ok(PhasePolicy::RandomUniform),
            "none" => Ok(PhasePolicy::None),
            other => {
                let angle = other
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown phase policy {other:?}")))?;
                Ok(PhasePolicy::FixedAngle(T::from_f64_lossy(angle)))
            }
        }
    }
}

/// One random phase draw, kept when a run is asked to log its phases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseDraw<T> {
    pub level: usize,
    pub set: ItemSet,
    pub theta: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult<T> {
    pub p_soln: T,
    pub final_norm: T,
    /// `1 / p_soln`; infinite when no amplitude reaches a solution.
    pub trials_equivalent: T,
    pub phase_log: Option<Vec<PhaseDraw<T>>>,
}

/// Aggregate over repeated tries on one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedResult<T> {
    pub p_values: Vec<T>,
    pub mean_p: T,
    /// Mean of `1 / p` over tries with `p > 0`; infinite if every try gave 0.
    pub mean_inverse_p: T,
    pub zero_tries: usize,
    /// Worst `|norm − 1|` across tries.
    pub max_norm_deviation: T,
}

impl<T: Real> AveragedResult<T> {
    pub fn from_runs(runs: &[RunResult<T>]) -> Self {
        let p_values: Vec<T> = runs.iter().map(|r| r.p_soln).collect();
        let count = T::from_usize(p_values.len()).expect("count");
        let mean_p = p_values.iter().fold(T::zero(), |s, &p| s + p) / count;
        let positive: Vec<T> = p_values.iter().copied().filter(|&p| p > T::zero()).collect();
        let mean_inverse_p = if positive.is_empty() {
            T::infinity()
        } else {
            positive.iter().fold(T::zero(), |s, &p| s + p.recip()) / T::from_usize(positive.len()).expect("count")
        };
        let max_norm_deviation = runs
            .iter()
            .fold(T::zero(), |m, r| m.max((r.final_norm - T::one()).abs()));
        AveragedResult {
            zero_tries: p_values.len() - positive.len(),
            p_values,
            mean_p,
            mean_inverse_p,
            max_norm_deviation,
        }
    }
}

/// Equal amplitude on every good set of `start_level`.
pub fn init_state<A: Amplitude, C: Classifier + ?Sized>(
    n: usize,
    start_level: usize,
    classifier: &C,
) -> Result<AmplitudeState<A>> {
    let level = Level::new(n, start_level)?;
    let good: Vec<bool> = level.iter().map(|s| !classifier.is_nogood(s.bits())).collect();
    let count = good.iter().filter(|&&g| g).count();
    if count == 0 {
        return Err(Error::NoGoodsAtStart(start_level));
    }
    let amp = A::from_real(A::Real::from_usize(count).expect("count").sqrt().recip());
    let amps = good.iter().map(|&g| if g { amp } else { A::zero() }).collect();
    Ok(AmplitudeState {
        n,
        level: start_level,
        amps,
    })
}

/// Multiplies each nogood amplitude by the policy's phase. Random angles are
/// drawn from `rng` in rank order of the nogood sets.
pub fn apply_phases<A, C, R>(
    state: &mut AmplitudeState<A>,
    classifier: &C,
    policy: PhasePolicy<A::Real>,
    rng: &mut R,
    mut log: Option<&mut Vec<PhaseDraw<A::Real>>>,
) -> Result<()>
where
    A: Amplitude,
    C: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    if policy == PhasePolicy::None {
        return Ok(());
    }
    let level = Level::new(state.n, state.level)?;
    for (amp, set) in state.amps.iter_mut().zip(level.iter()) {
        if !classifier.is_nogood(set.bits()) {
            continue;
        }
        *amp = match policy {
            PhasePolicy::Inversion => -*amp,
            PhasePolicy::FixedAngle(theta) => amp
                .rotated(theta)
                .ok_or_else(|| Error::Domain("fixed-angle phases need complex amplitudes".into()))?,
            PhasePolicy::RandomUniform => {
                let theta = A::Real::from_f64_lossy(rng.random::<f64>() * TAU);
                if let Some(log) = log.as_deref_mut() {
                    log.push(PhaseDraw {
                        level: state.level,
                        set,
                        theta,
                    });
                }
                amp.rotated(theta)
                    .ok_or_else(|| Error::Domain("random phases need complex amplitudes".into()))?
            }
            PhasePolicy::None => unreachable!(),
        };
    }
    Ok(())
}

fn check_map<A: Amplitude>(state: &AmplitudeState<A>, c: &MapCoefficients<A::Real>) -> Result<()> {
    if c.items() != state.n || c.level() != state.level {
        return Err(Error::CoefficientMismatch {
            have_n: c.items(),
            have_level: c.level(),
            n: state.n,
            level: state.level,
        });
    }
    if state.level + 1 > state.n.div_ceil(2) {
        return Err(Error::LevelRestriction {
            n: state.n,
            level: state.level,
        });
    }
    Ok(())
}

/// Level map by direct summation over every pair of sets.
pub fn apply_map<A: Amplitude>(state: &AmplitudeState<A>, c: &MapCoefficients<A::Real>) -> Result<AmplitudeState<A>> {
    check_map(state, c)?;
    let inputs: Vec<u32> = Level::new(state.n, state.level)?.masks();
    let outputs: Vec<u32> = Level::new(state.n, state.level + 1)?.masks();
    let a = c.a();
    let amps = outputs
        .par_iter()
        .map(|&r| {
            let mut acc = A::zero();
            for (&alpha, &psi) in inputs.iter().zip(&state.amps) {
                acc += psi * a[(r & alpha).count_ones() as usize];
            }
            acc
        })
        .collect();
    Ok(AmplitudeState {
        n: state.n,
        level: state.level + 1,
        amps,
    })
}

/// Weights `c_t` with `Σ_{t ≤ k} C(k, t) c_t = a_k`.
fn subset_weights<T: Real>(a: &[T]) -> Vec<T> {
    (0..a.len())
        .map(|t| {
            (0..=t).fold(T::zero(), |s, k| {
                let term = T::from_u64_exact(choose(t as i64, k as i64)) * a[k];
                if (t - k) % 2 == 0 {
                    s + term
                } else {
                    s - term
                }
            })
        })
        .collect()
}

/// Reusable scratch for the transform-based level map.
struct FastMap<T> {
    n: usize,
    weights: Vec<T>,
}

impl<T: Real> FastMap<T> {
    fn new(c: &MapCoefficients<T>) -> Self {
        FastMap {
            n: c.items(),
            weights: subset_weights(c.a()),
        }
    }

    fn apply<A: Amplitude<Real = T>>(
        &self,
        input: &[A],
        in_masks: &[u32],
        out_masks: &[u32],
        buf: &mut Vec<A>,
    ) -> Vec<A> {
        let size = 1usize << self.n;
        buf.clear();
        buf.resize(size, A::zero());
        for (&mask, &psi) in in_masks.iter().zip(input) {
            buf[mask as usize] = psi;
        }
        // g(T) = Σ_{α ⊇ T} ψ(α)
        for bit in 0..self.n {
            let half = 1usize << bit;
            for block in buf.chunks_exact_mut(half * 2) {
                let (lo, hi) = block.split_at_mut(half);
                for (z, &o) in lo.iter_mut().zip(hi.iter()) {
                    *z += o;
                }
            }
        }
        let top = self.weights.len();
        for (mask, v) in buf.iter_mut().enumerate() {
            let t = mask.count_ones() as usize;
            *v = if t < top { *v * self.weights[t] } else { A::zero() };
        }
        // ψ'(r) = Σ_{T ⊆ r} c_{|T|} g(T)
        for bit in 0..self.n {
            let half = 1usize << bit;
            for block in buf.chunks_exact_mut(half * 2) {
                let (lo, hi) = block.split_at_mut(half);
                for (z, o) in lo.iter().zip(hi.iter_mut()) {
                    *o += *z;
                }
            }
        }
        out_masks.iter().map(|&m| buf[m as usize]).collect()
    }
}

/// Level map through subset transforms; same result as [`apply_map`].
pub fn apply_map_fast<A: Amplitude>(
    state: &AmplitudeState<A>,
    c: &MapCoefficients<A::Real>,
) -> Result<AmplitudeState<A>> {
    check_map(state, c)?;
    let inputs = Level::new(state.n, state.level)?.masks();
    let outputs = Level::new(state.n, state.level + 1)?.masks();
    let mut buf = Vec::new();
    let amps = FastMap::new(c).apply(&state.amps, &inputs, &outputs, &mut buf);
    Ok(AmplitudeState {
        n: state.n,
        level: state.level + 1,
        amps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MapKernel {
    Direct,
    #[default]
    Fast,
}

/// Precomputed per-problem data for repeated runs: nogood table, level masks,
/// and level maps from the start level up to `L`.
pub struct Simulator<T: Real> {
    n: usize,
    l: usize,
    start: usize,
    table: NogoodTable,
    coeffs: Vec<Arc<MapCoefficients<T>>>,
    fast: Vec<FastMap<T>>,
    masks: Vec<Vec<u32>>,
    solution_ranks: Vec<usize>,
    kernel: MapKernel,
    record_phases: bool,
}

impl<T: Real> Simulator<T> {
    pub fn new(problem: &Problem, start_level: usize, cache: &CoefficientCache<T>) -> Result<Self> {
        let n = problem.items();
        let l = problem.solution_level();
        if n > MAX_ITEMS {
            return Err(Error::TooManyItems(n));
        }
        if l > n.div_ceil(2) {
            return Err(Error::LevelRestriction { n, level: l - 1 });
        }
        if start_level >= l {
            return Err(Error::Domain(format!(
                "start level {start_level} must be below the solution level {l}"
            )));
        }
        let table = problem.nogood_table();
        let coeffs = (start_level..l).map(|i| cache.get(n, i)).collect::<Result<Vec<_>>>()?;
        let fast = coeffs.iter().map(|c| FastMap::new(c)).collect();
        let masks: Vec<Vec<u32>> = (start_level..=l)
            .map(|i| Level::new(n, i).map(|lvl| lvl.masks()))
            .collect::<Result<_>>()?;
        let solution_ranks = masks[l - start_level]
            .iter()
            .enumerate()
            .filter(|(_, &m)| !table.is_nogood(m))
            .map(|(r, _)| r)
            .collect();
        if masks[0].iter().all(|&m| table.is_nogood(m)) {
            return Err(Error::NoGoodsAtStart(start_level));
        }
        Ok(Simulator {
            n,
            l,
            start: start_level,
            table,
            coeffs,
            fast,
            masks,
            solution_ranks,
            kernel: MapKernel::Fast,
            record_phases: false,
        })
    }

    pub fn with_kernel(mut self, kernel: MapKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_phase_log(mut self, record: bool) -> Self {
        self.record_phases = record;
        self
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn solution_level(&self) -> usize {
        self.l
    }

    /// Number of good sets at the solution level.
    pub fn solution_count(&self) -> usize {
        self.solution_ranks.len()
    }

    pub fn classifier(&self) -> &NogoodTable {
        &self.table
    }

    /// Propagates to the solution level and returns the final state.
    pub fn final_state<A, R>(
        &self,
        policy: PhasePolicy<T>,
        rng: &mut R,
        mut log: Option<&mut Vec<PhaseDraw<T>>>,
    ) -> Result<AmplitudeState<A>>
    where
        A: Amplitude<Real = T>,
        R: Rng + ?Sized,
    {
        let mut state: AmplitudeState<A> = init_state(self.n, self.start, &self.table)?;
        let mut buf = Vec::new();
        for (step, level) in (self.start..self.l).enumerate() {
            apply_phases(&mut state, &self.table, policy, rng, log.as_deref_mut())?;
            state = match self.kernel {
                MapKernel::Direct => apply_map(&state, &self.coeffs[step])?,
                MapKernel::Fast => AmplitudeState {
                    n: self.n,
                    level: level + 1,
                    amps: self.fast[step].apply(&state.amps, &self.masks[step], &self.masks[step + 1], &mut buf),
                },
            };
        }
        Ok(state)
    }

    fn readout<A: Amplitude<Real = T>>(
        &self,
        state: &AmplitudeState<A>,
        phase_log: Option<Vec<PhaseDraw<T>>>,
    ) -> RunResult<T> {
        let p_soln = self
            .solution_ranks
            .iter()
            .fold(T::zero(), |s, &r| s + state.amps[r].norm_sqr());
        RunResult {
            p_soln,
            final_norm: state.norm(),
            trials_equivalent: if p_soln > T::zero() {
                p_soln.recip()
            } else {
                T::infinity()
            },
            phase_log,
        }
    }

    /// One run with complex amplitudes, whatever the policy.
    pub fn run_complex<R: Rng + ?Sized>(&self, policy: PhasePolicy<T>, rng: &mut R) -> Result<RunResult<T>>
    where
        Complex<T>: Amplitude<Real = T>,
    {
        let mut log = self.record_phases.then(Vec::new);
        let state: AmplitudeState<Complex<T>> = self.final_state(policy, rng, log.as_mut())?;
        Ok(self.readout(&state, log))
    }

    /// One run. Policies that keep amplitudes real use real arithmetic.
    pub fn run<R: Rng + ?Sized>(&self, policy: PhasePolicy<T>, rng: &mut R) -> Result<RunResult<T>>
    where
        T: Amplitude<Real = T>,
        Complex<T>: Amplitude<Real = T>,
    {
        if policy.is_real() {
            let state: AmplitudeState<T> = self.final_state(policy, rng, None)?;
            Ok(self.readout(&state, self.record_phases.then(Vec::new)))
        } else {
            self.run_complex(policy, rng)
        }
    }

    /// `tries` independent runs; deterministic policies run once.
    pub fn run_averaged<R: Rng + ?Sized>(
        &self,
        policy: PhasePolicy<T>,
        tries: usize,
        rng: &mut R,
    ) -> Result<AveragedResult<T>>
    where
        T: Amplitude<Real = T>,
        Complex<T>: Amplitude<Real = T>,
    {
        if tries == 0 {
            return Err(Error::Config("tries must be at least 1".into()));
        }
        let tries = if policy.is_random() { tries } else { 1 };
        let runs = (0..tries).map(|_| self.run(policy, rng)).collect::<Result<Vec<_>>>()?;
        Ok(AveragedResult::from_runs(&runs))
    }
}

/// Single run of `p` from `start_level`, solving the level maps on the fly.
pub fn run<T, R>(p: &Problem, start_level: usize, policy: PhasePolicy<T>, rng: &mut R) -> Result<RunResult<T>>
where
    T: Real + Amplitude<Real = T>,
    Complex<T>: Amplitude<Real = T>,
    R: Rng + ?Sized,
{
    let cache = CoefficientCache::<T>::new();
    Simulator::new(p, start_level, &cache)?.run(policy, rng)
}

/// Repeated runs of `p`; see [`Simulator::run_averaged`].
pub fn run_averaged<T, R>(
    p: &Problem,
    start_level: usize,
    policy: PhasePolicy<T>,
    tries: usize,
    rng: &mut R,
) -> Result<AveragedResult<T>>
where
    T: Real + Amplitude<Real = T>,
    Complex<T>: Amplitude<Real = T>,
    R: Rng + ?Sized,
{
    let cache = CoefficientCache::<T>::new();
    Simulator::new(p, start_level, &cache)?.run_averaged(policy, tries, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::solve_coefficients;
    use crate::oracle::{closest_unitary_oracle, ideal_matrix};
    use crate::problems::{generate_random_3sat, generate_random_csp};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C64 = Complex<f64>;

    fn set(items: &[usize]) -> ItemSet {
        ItemSet::from_items(items.iter().copied()).unwrap()
    }

    fn fixture() -> Problem {
        Problem::new(3, 2, vec![set(&[3])]).unwrap()
    }

    fn random_state(n: usize, level: usize, rng: &mut ChaCha8Rng) -> AmplitudeState<C64> {
        let size = Level::new(n, level).unwrap().size();
        let amps = (0..size)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        AmplitudeState::from_amplitudes(n, level, amps).unwrap()
    }

    #[test]
    fn init_examples() {
        let empty = Problem::new(3, 2, vec![set(&[3])]).unwrap();
        let s: AmplitudeState<C64> = init_state(3, 0, &empty).unwrap();
        assert_eq!(s.amplitudes(), &[C64::new(1.0, 0.0)]);

        let s: AmplitudeState<f64> = init_state(3, 1, &fixture()).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(s.amplitude(set(&[1])), h);
        assert_eq!(s.amplitude(set(&[2])), h);
        assert_eq!(s.amplitude(set(&[3])), 0.0);

        let free = Problem::new(10, 5, vec![]).unwrap();
        let s: AmplitudeState<f64> = init_state(10, 2, &free).unwrap();
        assert!(s.amplitudes().iter().all(|&a| (a - 1.0 / 45f64.sqrt()).abs() < 1e-15));

        let dead = Problem::new(2, 1, vec![set(&[1]), set(&[2])]).unwrap();
        assert!(matches!(
            init_state::<f64, _>(2, 1, &dead),
            Err(Error::NoGoodsAtStart(1))
        ));
    }

    #[test]
    fn phases_on_fixture() {
        let theta = 0.7;
        let mut s: AmplitudeState<C64> =
            AmplitudeState::from_amplitudes(3, 1, vec![C64::new(1.0 / 3f64.sqrt(), 0.0); 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        apply_phases(&mut s, &fixture(), PhasePolicy::FixedAngle(theta), &mut rng, None).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_eq!(s.amplitude(set(&[1])), C64::new(r, 0.0));
        assert_eq!(s.amplitude(set(&[2])), C64::new(r, 0.0));
        assert!((s.amplitude(set(&[3])) - C64::from_polar(r, theta)).norm() < 1e-15);

        let before = s.clone();
        apply_phases(&mut s, &fixture(), PhasePolicy::None, &mut rng, None).unwrap();
        assert_eq!(s, before);

        let free = Problem::new(3, 2, vec![]).unwrap();
        apply_phases(&mut s, &free, PhasePolicy::Inversion, &mut rng, None).unwrap();
        assert_eq!(s, before);

        let mut real: AmplitudeState<f64> = AmplitudeState::zeros(3, 1).unwrap();
        assert!(apply_phases(&mut real, &fixture(), PhasePolicy::RandomUniform, &mut rng, None).is_err());
    }

    #[test]
    fn map_on_fixture() {
        let theta: f64 = 1.3;
        let c = solve_coefficients::<f64>(3, 1).unwrap();
        let r = 1.0 / 3f64.sqrt();
        let e = C64::from_polar(1.0, theta);
        let s = AmplitudeState::from_amplitudes(3, 1, vec![C64::new(r, 0.0), C64::new(r, 0.0), e * r]).unwrap();
        let scale = 1.0 / (3.0 * 3f64.sqrt());
        let expect = [
            (C64::new(4.0, 0.0) - e) * scale,
            (C64::new(1.0, 0.0) + e * 2.0) * scale,
            (C64::new(1.0, 0.0) + e * 2.0) * scale,
        ];
        for out in [apply_map(&s, &c).unwrap(), apply_map_fast(&s, &c).unwrap()] {
            assert_eq!(out.level(), 2);
            assert!((out.amplitude(set(&[1, 2])) - expect[0]).norm() < 1e-14);
            assert!((out.amplitude(set(&[1, 3])) - expect[1]).norm() < 1e-14);
            assert!((out.amplitude(set(&[2, 3])) - expect[2]).norm() < 1e-14);
        }
    }

    #[test]
    fn map_from_empty_set() {
        let c = solve_coefficients::<f64>(3, 0).unwrap();
        let s = AmplitudeState::from_amplitudes(3, 0, vec![1.0f64]).unwrap();
        for out in [apply_map(&s, &c).unwrap(), apply_map_fast(&s, &c).unwrap()] {
            for &a in out.amplitudes() {
                assert!((a - 1.0 / 3f64.sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let c = solve_coefficients::<f64>(10, 3).unwrap();
        let s = AmplitudeState::<C64>::zeros(10, 3).unwrap();
        assert!(apply_map(&s, &c).unwrap().amplitudes().iter().all(|a| a.is_zero()));
        assert!(apply_map_fast(&s, &c).unwrap().amplitudes().iter().all(|a| a.is_zero()));
    }

    #[test]
    fn map_guards() {
        let c = solve_coefficients::<f64>(10, 3).unwrap();
        let s = AmplitudeState::<f64>::zeros(10, 2).unwrap();
        assert!(matches!(apply_map(&s, &c), Err(Error::CoefficientMismatch { .. })));
        let raw = MapCoefficients::from_raw(10, 4, vec![0.0; 5]).unwrap();
        let high = AmplitudeState::<f64>::zeros(10, 4).unwrap();
        assert!(apply_map_fast(&high, &raw).is_ok());
        assert!(MapCoefficients::<f64>::from_raw(10, 5, vec![0.0; 6]).is_err());
    }

    #[test]
    fn fast_matches_direct_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in 1usize..=10 {
            for i in 0..n.div_ceil(2) {
                let c = solve_coefficients::<f64>(n, i).unwrap();
                let s = random_state(n, i, &mut rng);
                let d = apply_map(&s, &c).unwrap();
                let f = apply_map_fast(&s, &c).unwrap();
                assert!(d.max_abs_diff(&f) < 1e-12, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn map_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [6usize, 9, 14] {
            for i in 0..n.div_ceil(2) {
                let c = solve_coefficients::<f64>(n, i).unwrap();
                let mut s = random_state(n, i, &mut rng);
                let norm = s.norm();
                s.amplitudes_mut().iter_mut().for_each(|a| *a /= norm);
                let out = apply_map_fast(&s, &c).unwrap();
                assert!((out.norm() - 1.0).abs() < 1e-10, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn fixture_closed_form() {
        let p = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for step in 0..100 {
            let theta = TAU * step as f64 / 100.0;
            let r = run::<f64, _>(&p, 0, PhasePolicy::FixedAngle(theta), &mut rng).unwrap();
            let expect = (17.0 - 8.0 * theta.cos()) / 27.0;
            assert!((r.p_soln - expect).abs() < 1e-12);
            assert!((r.final_norm - 1.0).abs() < 1e-12);
        }
        let inv = run::<f64, _>(&p, 0, PhasePolicy::Inversion, &mut rng).unwrap();
        assert!((inv.p_soln - 25.0 / 27.0).abs() < 1e-12);
        assert!((inv.trials_equivalent - 27.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn fixture_single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = run::<f32, _>(&fixture(), 0, PhasePolicy::Inversion, &mut rng).unwrap();
        assert!((r.p_soln - 25.0 / 27.0).abs() < 1e-5);
        let r = run::<f32, _>(&fixture(), 0, PhasePolicy::FixedAngle(1.0), &mut rng).unwrap();
        assert!((r.p_soln - (17.0 - 8.0 * 1f32.cos()) / 27.0).abs() < 1e-5);
    }

    #[test]
    fn random_phase_mean_and_log() {
        let cache = CoefficientCache::<f64>::new();
        let sim = Simulator::new(&fixture(), 0, &cache).unwrap().with_phase_log(true);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let r = sim.run(PhasePolicy::RandomUniform, &mut rng).unwrap();
        let log = r.phase_log.unwrap();
        // one nogood ({3}) at level 1; level 0 has none
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].set, set(&[3]));
        let expect = (17.0 - 8.0 * log[0].theta.cos()) / 27.0;
        assert!((r.p_soln - expect).abs() < 1e-12);

        let avg = sim.run_averaged(PhasePolicy::RandomUniform, 100_000, &mut rng).unwrap();
        assert!((avg.mean_p - 17.0 / 27.0).abs() < 0.005);
        assert!(avg.mean_inverse_p >= 1.0 / avg.mean_p);
    }

    #[test]
    fn deterministic_policies_collapse_tries() {
        let cache = CoefficientCache::<f64>::new();
        let sim = Simulator::new(&fixture(), 0, &cache).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let avg = sim.run_averaged(PhasePolicy::Inversion, 10, &mut rng).unwrap();
        assert_eq!(avg.p_values.len(), 1);
        assert!(sim.run_averaged(PhasePolicy::Inversion, 0, &mut rng).is_err());
    }

    #[test]
    fn zero_probability_is_infinite_trials() {
        let runs = vec![
            RunResult {
                p_soln: 0.0,
                final_norm: 1.0,
                trials_equivalent: f64::INFINITY,
                phase_log: None,
            },
            RunResult {
                p_soln: 0.5,
                final_norm: 1.0,
                trials_equivalent: 2.0,
                phase_log: None,
            },
        ];
        let avg = AveragedResult::from_runs(&runs);
        assert_eq!(avg.zero_tries, 1);
        assert_eq!(avg.mean_inverse_p, 2.0);
        assert_eq!(avg.mean_p, 0.25);
    }

    #[test]
    fn unconstrained_run_is_unitary() {
        let p = Problem::new(12, 6, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = run::<f64, _>(&p, 2, PhasePolicy::None, &mut rng).unwrap();
        assert!((r.p_soln - 1.0).abs() < 1e-9);
    }

    #[test]
    fn run_rejects_bad_levels() {
        let p = Problem::new(6, 4, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            run(&p, 2, PhasePolicy::<f64>::Inversion, &mut rng),
            Err(Error::LevelRestriction { .. })
        ));
        let q = Problem::new(6, 3, vec![]).unwrap();
        assert!(run(&q, 3, PhasePolicy::<f64>::Inversion, &mut rng).is_err());
    }

    #[test]
    fn real_path_matches_complex_path() {
        let cache = CoefficientCache::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in [0, 10, 20, 30] {
            let p = generate_random_csp(12, m, ItemSet::first_items(6), &mut rng).unwrap();
            let sim = Simulator::new(&p, 2, &cache).unwrap();
            let real = sim.run(PhasePolicy::Inversion, &mut rng).unwrap();
            let complex = sim.run_complex(PhasePolicy::Inversion, &mut rng).unwrap();
            assert!((real.p_soln - complex.p_soln).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("inversion".parse::<PhasePolicy<f64>>().unwrap(), PhasePolicy::Inversion);
        assert_eq!(
            "random".parse::<PhasePolicy<f64>>().unwrap(),
            PhasePolicy::RandomUniform
        );
        assert_eq!("none".parse::<PhasePolicy<f64>>().unwrap(), PhasePolicy::None);
        assert_eq!(
            "fixed:0.5".parse::<PhasePolicy<f64>>().unwrap(),
            PhasePolicy::FixedAngle(0.5)
        );
        assert!("sideways".parse::<PhasePolicy<f64>>().is_err());
    }

    /// Explicit matrix chain: oracle polar factors and diagonal phase matrices.
    fn matrix_chain(p: &Problem, start: usize, thetas: &[Vec<f64>]) -> Vec<C64> {
        let n = p.items();
        let start_level = Level::new(n, start).unwrap();
        let good: Vec<bool> = start_level.iter().map(|s| p.is_good(s)).collect();
        let g = good.iter().filter(|&&x| x).count() as f64;
        let mut v = DVector::<C64>::from_iterator(
            good.len(),
            good.iter()
                .map(|&x| if x { C64::new(1.0 / g.sqrt(), 0.0) } else { C64::zero() }),
        );
        for (step, level) in (start..p.solution_level()).enumerate() {
            let sets: Vec<ItemSet> = Level::new(n, level).unwrap().iter().collect();
            let mut draws = thetas[step].iter();
            let diag = DVector::<C64>::from_iterator(
                sets.len(),
                sets.iter().map(|&s| {
                    if p.is_good(s) {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::from_polar(1.0, *draws.next().unwrap())
                    }
                }),
            );
            let (u, _) = closest_unitary_oracle(n, level, &ideal_matrix(n, level).unwrap()).unwrap();
            let u: DMatrix<C64> = u.map(|x| C64::new(x, 0.0));
            v = u * v.component_mul(&diag);
        }
        v.iter().copied().collect()
    }

    #[test]
    fn run_matches_matrix_chain() {
        let cache = CoefficientCache::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [6, 7, 8] {
            for m in [3, 7, 10] {
                let l = n / 2;
                let p = generate_random_csp(n, m, ItemSet::first_items(l), &mut rng).unwrap();
                for kernel in [MapKernel::Direct, MapKernel::Fast] {
                    let sim = Simulator::new(&p, 1, &cache).unwrap().with_kernel(kernel);
                    let mut log = Vec::new();
                    let state: AmplitudeState<C64> = sim
                        .final_state(PhasePolicy::RandomUniform, &mut rng, Some(&mut log))
                        .unwrap();
                    let thetas: Vec<Vec<f64>> = (1..l)
                        .map(|lvl| log.iter().filter(|d| d.level == lvl).map(|d| d.theta).collect())
                        .collect();
                    let expect = matrix_chain(&p, 1, &thetas);
                    let worst = state
                        .amplitudes()
                        .iter()
                        .zip(&expect)
                        .map(|(x, y)| (x - y).norm())
                        .fold(0.0, f64::max);
                    assert!(worst < 1e-9, "n={n} m={m} {kernel:?}: {worst:e}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn norm_is_conserved(seed in any::<u64>(), n in 6usize..=14, density in 0.0f64..6.0, random in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = n / 2;
            let m = ((density * n as f64).round() as usize).min(n * (n - 1) / 2 - l * (l - 1) / 2);
            let p = generate_random_csp(n, m, ItemSet::first_items(l), &mut rng).unwrap();
            let policy = if random { PhasePolicy::RandomUniform } else { PhasePolicy::Inversion };
            let r = run::<f64, _>(&p, 2.min(l - 1), policy, &mut rng).unwrap();
            prop_assert!((r.final_norm - 1.0).abs() <= 1e-9);
            prop_assert!(r.p_soln <= r.final_norm * r.final_norm + 1e-9);
            prop_assert!(r.p_soln > 0.0 || m == 0);
        }

        #[test]
        fn sat_norm_is_conserved(seed in any::<u64>(), vars in 4usize..=7, ratio in 0usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = generate_random_3sat(vars, ratio * vars, &mut rng).unwrap();
            if crate::problems::is_soluble(&p) {
                let r = run::<f64, _>(&p, 3, PhasePolicy::Inversion, &mut rng).unwrap();
                prop_assert!((r.final_norm - 1.0).abs() <= 1e-9);
            }
        }
    }
}
