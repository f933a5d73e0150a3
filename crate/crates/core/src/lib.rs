//! Classical simulation of structured quantum search over the lattice of
//! item subsets.
//!
//! Sets of items live on the levels of the subset lattice. The search starts
//! with amplitude spread over the good sets of a low level, rephases nogoods,
//! and moves amplitude one level up at a time through a unitary map that is
//! as close as possible to "send each set equally to its supersets". The
//! chance of measuring a solution at the top level is compared against
//! classical backtracking and ensemble theory for random binary constraint
//! problems and random 3-SAT.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the experiment harness uses.

pub mod backtrack;
pub mod coefficients;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod oracle;
pub mod problems;
pub mod scalar;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
pub use lattice::{ItemSet, Level};
pub use problems::{Classification, Problem};
pub use scalar::Real;
pub use sim::{Amplitude, MapKernel, PhasePolicy};

pub type MapCoefficients = coefficients::MapCoefficients<f64>;
pub type ScaledCoefficients = coefficients::ScaledCoefficients<f64>;
pub type CoefficientCache = coefficients::CoefficientCache<f64>;
pub type AmplitudeState = sim::AmplitudeState<num_complex::Complex<f64>>;
pub type RealAmplitudeState = sim::AmplitudeState<f64>;
pub type Simulator = sim::Simulator<f64>;
pub type RunResult = sim::RunResult<f64>;
pub type AveragedResult = sim::AveragedResult<f64>;
pub type Policy = sim::PhasePolicy<f64>;
