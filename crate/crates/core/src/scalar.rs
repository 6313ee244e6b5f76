//! Floating point abstraction shared by the metrics and decoder code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar used for timestamps, probabilities and scores.
///
/// Implemented for `f32` and `f64`. File formats are always read and written
/// through `f64`, so narrower scalars only lose precision in memory.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts to every Scalar")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize converts to every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Rounds to whole milliseconds, the resolution of serialized timestamps.
    #[inline]
    fn quantize_ms(self) -> Self {
        let k = Self::lit(1000.0);
        (self * k).round() / k
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Rounds an `f64` to millisecond resolution.
pub(crate) fn round_ms(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_is_idempotent() {
        for x in [0.0, 0.333_333_3, 4.2, 1.0 / 3.0 + 0.1, 12345.6789] {
            let q = x.quantize_ms();
            assert_eq!(q, q.quantize_ms());
            assert_eq!(q, round_ms(x));
        }
    }
}
