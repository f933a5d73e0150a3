//! Scalar abstraction shared by the coefficient solver and the simulator.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, NumCast};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumCast + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Residual tolerance the Newton solver drives towards.
    fn solver_tolerance() -> Self;

    /// Largest residual a returned coefficient set may carry.
    fn acceptance_tolerance() -> Self;

    fn from_u64_exact(v: u64) -> Self {
        <Self as NumCast>::from(v).expect("u64 converts to float")
    }

    fn from_f64_lossy(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 converts to float")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).expect("float converts to f64")
    }
}

impl Real for f64 {
    fn solver_tolerance() -> Self {
        1e-12
    }

    fn acceptance_tolerance() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn solver_tolerance() -> Self {
        2e-6
    }

    fn acceptance_tolerance() -> Self {
        1e-5
    }
}
