//! Element type abstraction for the tensor core.
//!
//! Storage and training run on `f32`; gradient checking instantiates the same
//! graph code at `f64`, where central differences are not swamped by
//! single-precision rounding noise.

use std::fmt::Debug;

pub trait Real:
    num_traits::Float + num_traits::NumAssign + Default + Debug + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
}
