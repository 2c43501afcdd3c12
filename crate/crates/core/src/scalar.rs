use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the similarity math is written against.
///
/// Implemented for `f32` and `f64`. Provider output is always `f32`
/// (matching the on-disk cache format); pooling and everything downstream
/// may run at either precision.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`, used for constants.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant representable in scalar")
    }

    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize representable in scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    /// Clamp into `[lo, hi]`.
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        if self < lo {
            lo
        } else if self > hi {
            hi
        } else {
            self
        }
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {}

/// Arithmetic mean and population standard deviation (divide by N).
///
/// Returns `None` for an empty slice.
pub fn mean_and_population_sd<T: Scalar>(values: &[T]) -> Option<(T, T)> {
    if values.is_empty() {
        return None;
    }
    let n = T::of_usize(values.len());
    let mean = values.iter().fold(T::zero(), |acc, &v| acc + v) / n;
    let var = values.iter().fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean)) / n;
    Some((mean, var.sqrt()))
}
