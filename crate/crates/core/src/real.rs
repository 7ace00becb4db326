use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar accepted by the pricing and regression kernels.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Standard normal density.
#[inline]
pub fn norm_pdf<T: Real>(x: T) -> T {
    (-(x * x) / T::lit(2.0)).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Standard normal cumulative distribution, accurate in both tails.
#[inline]
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::lit(0.5 * libm::erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}
