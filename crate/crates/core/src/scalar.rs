//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
///
/// The linear algebra, prior, smoother, hyperparameter objective and scoring
/// code is written against this trait. Data ingestion and the local fitting
/// pipeline work in `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal. Never fails for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }

    /// Standard normal CDF.
    fn std_normal_cdf(self) -> Self {
        Self::lit(0.5 * libm::erfc(-self.as_f64() / std::f64::consts::SQRT_2))
    }

    /// Standard normal density.
    fn std_normal_pdf(self) -> Self {
        let z = self.as_f64();
        Self::lit((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `0.5 * ln(2π)`.
pub fn half_ln_2pi<T: Real>() -> T {
    T::lit(0.918_938_533_204_672_8)
}
