//! Floating point abstraction for the metric computations.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

/// Scalar type the entropy and rate metrics are generic over.
///
/// Implemented for `f32` and `f64`; the rest of the crate uses
/// [`crate::Metric`] (`f64`) since the documented tolerances exceed single
/// precision.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + AddAssign + Sum + Debug
{
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
