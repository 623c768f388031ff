use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Scalar coefficient type for values and matrix entries: `f32` or `f64`.
///
/// Event measures never go through this trait; they are computed in exact
/// dyadic/rational arithmetic regardless of the scalar chosen here.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Display
    + Debug
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless when the scalar is `f64`; rounds once for `f32`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to any scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier-compensated summation; the error term is carried so that row
/// sums of builtin matrices come out within a few ulps of their exact value.
pub fn compensated_sum<S: Scalar>(items: impl IntoIterator<Item = S>) -> S {
    let mut sum = S::zero();
    let mut compensation = S::zero();
    for x in items {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            compensation = compensation + ((sum - t) + x);
        } else {
            compensation = compensation + ((x - t) + sum);
        }
        sum = t;
    }
    sum + compensation
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cesaro_row() {
        for i in [1usize, 2, 3, 7, 100, 999] {
            let sum = compensated_sum((0..i).map(|_| 1.0f64 / i as f64));
            assert!((sum - 1.0).abs() <= 4.0 * f64::EPSILON, "i = {i}: {sum}");
        }
    }

    #[test]
    fn compensated_sum_empty_is_zero() {
        assert_eq!(compensated_sum(std::iter::empty::<f64>()), 0.0);
    }
}
