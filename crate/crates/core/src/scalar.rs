//! Numeric scalar abstraction shared by the Gaussian, bandit and meta-learning layers.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating point scalar: `f32` or `f64`.
///
/// The tolerance constants scale with the precision of the type so that the
/// same code path stays meaningful in single precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Diagonal jitter added once before a Cholesky factorisation is declared failed.
    const CHOLESKY_JITTER: f64;
    /// Smallest admissible squared pivot.
    const PIVOT_FLOOR: f64;
    /// Largest tolerated asymmetry |a_ij - a_ji|, relative to max(1, |a|).
    const SYMMETRY_TOL: f64;
    /// Slack below zero that a KL divergence may show from rounding alone.
    const KL_CLAMP: f64;

    /// Lossy conversion from `f64`; every `f64` fits in both supported types.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    const CHOLESKY_JITTER: f64 = 1e-10;
    const PIVOT_FLOOR: f64 = 1e-12;
    const SYMMETRY_TOL: f64 = 1e-9;
    const KL_CLAMP: f64 = 1e-10;
}

impl Scalar for f32 {
    const CHOLESKY_JITTER: f64 = 1e-5;
    const PIVOT_FLOOR: f64 = 1e-7;
    const SYMMETRY_TOL: f64 = 1e-4;
    const KL_CLAMP: f64 = 1e-4;
}
