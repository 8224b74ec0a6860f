//! Scalar abstraction: every deterministic computation in this crate is generic
//! over a floating-point type implementing [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite constant")
    }

    /// Conversion from a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).unwrap_or_else(|| Self::of(n as f64))
    }

    #[inline]
    fn of_u64(n: u64) -> Self {
        <Self as FromPrimitive>::from_u64(n).unwrap_or_else(|| Self::of(n as f64))
    }

    #[inline]
    fn half(self) -> Self {
        self / (Self::one() + Self::one())
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_roundtrip() {
        assert_eq!(f64::of(0.25), 0.25);
        assert_eq!(f32::of(0.25), 0.25f32);
        assert_eq!(f64::of_usize(7), 7.0);
        assert_eq!(f64::of_u64(1 << 40), (1u64 << 40) as f64);
        assert_eq!(1.0f64.half(), 0.5);
    }
}
