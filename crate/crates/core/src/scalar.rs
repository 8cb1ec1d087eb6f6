//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Real floating-point type the solver is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into this scalar type.
    fn count(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("count representable in scalar type")
    }

    /// Relative tolerance `rel`, widened to `1000·ε_mach` when the type is
    /// too coarse to resolve `rel`.
    fn tolerance(rel: f64) -> Self {
        Self::lit(rel).max(Self::lit(1e3) * Self::epsilon())
    }

    /// Lossy view as `f64`, used for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
