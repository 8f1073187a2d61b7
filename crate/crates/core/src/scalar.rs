//! Scalar abstractions.
//!
//! Entropy calculus and rate-distortion routines need logarithms, so they run
//! over [`Scalar`] (f32 or f64). The simplex solver only needs field
//! arithmetic and an ordering, so it runs over [`LpScalar`], which is also
//! implemented for exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::{BigRational, Rational64};
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Floating-point scalar used by the information-theoretic core.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance accepted when checking that a PMF sums to one.
    fn norm_tol() -> Self;

    /// Tolerance used when comparing rate constraints on closure boundaries.
    fn boundary_tol() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn norm_tol() -> Self {
        1e-12
    }

    fn boundary_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn norm_tol() -> Self {
        1e-5
    }

    fn boundary_tol() -> Self {
        1e-4
    }
}

/// Ordered field element usable by the dense simplex solver.
pub trait LpScalar: Clone + Num + Signed + PartialOrd + Debug {
    /// Pivot tolerance. Zero for exact arithmetic.
    fn pivot_eps() -> Self;
}

impl LpScalar for f64 {
    fn pivot_eps() -> Self {
        1e-12
    }
}

impl LpScalar for f32 {
    fn pivot_eps() -> Self {
        1e-6
    }
}

impl LpScalar for Rational64 {
    fn pivot_eps() -> Self {
        Rational64::zero()
    }
}

impl LpScalar for BigRational {
    fn pivot_eps() -> Self {
        BigRational::zero()
    }
}
