//! Scalar abstraction shared by every numeric kernel.
//!
//! Inference runs in `f32`; `f64` instantiations exist so gradient checks and
//! other verification paths can run with enough headroom for finite
//! differences.

use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_weight(x: f32) -> Self {
        Self::from_f32(x).expect("f32 representable in scalar type")
    }

    #[inline]
    fn to_weight(self) -> f32 {
        self.to_f32().unwrap_or(f32::NAN)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
