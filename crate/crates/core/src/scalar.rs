use std::fmt;

use nalgebra as na;
use num_traits as nt;

/// Floating point scalar the whole crate is generic over: `f32` or `f64`.
///
/// Transcendental functions and comparisons come from [`na::RealField`]; constants and
/// lossless-enough conversions come from num-traits.
pub trait Real:
    na::RealField + Copy + nt::FloatConst + nt::ToPrimitive + fmt::LowerExp + Send + Sync
{
    /// Converts an `f64` literal. Panics only if the target cannot represent it at all,
    /// which cannot happen for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
    }

    fn count(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn machine_epsilon() -> Self {
        Self::default_epsilon()
    }

    fn half() -> Self {
        Self::lit(0.5)
    }

    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}
