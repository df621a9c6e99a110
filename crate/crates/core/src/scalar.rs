//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Tolerances quoted throughout the crate (1e-9, 1e-12) are calibrated for
/// `f64`; `f32` is supported for exploratory use only.
pub trait Real:
    Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts a literal, panicking only if the target type cannot hold it.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Tolerance for independence and information-measure equalities.
pub const EQ_TOL: f64 = 1e-9;
/// Tolerance for normalization and row-stochasticity checks.
pub const SUM_TOL: f64 = 1e-12;

/// `x log2 x` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn xlog2x<T: Real>(x: T) -> T {
    if x > T::zero() {
        x * x.log2()
    } else {
        T::zero()
    }
}

/// Median of three values by sorting.
#[inline]
pub(crate) fn median3<T: Real>(a: T, b: T, c: T) -> T {
    let mut v = [a, b, c];
    v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    v[1]
}
