//! Floating point scalar abstraction shared by every numerical route.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// f32 or f64.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an f64 literal. Never fails for f32/f64.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier compensated summation over a slice, in slice order.
pub fn compensated_sum<T: Scalar>(values: &[T]) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = vec![1.0e16, 1.0, -1.0e16, 1.0];
        assert_eq!(compensated_sum(&v), 2.0);
        let naive: f64 = v.iter().sum();
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn lit_round_trips() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::lit(-3.25), -3.25);
    }
}
