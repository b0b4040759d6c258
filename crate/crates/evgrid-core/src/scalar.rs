//! Scalar abstraction for the numeric core.
//!
//! All model coefficients, objective values, QUBO energies, and temperatures
//! are generic over a floating-point scalar so the same code runs in `f32`
//! and `f64`. Concrete `f64` aliases live at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Shorthand for lossy conversion from `f64` literals.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    /// Lossy conversion from a usize count.
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize conversion")
    }

    /// Conversion to `f64` for RNG comparisons and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_of_squares<S: Scalar>(xs: &[S]) -> S {
        xs.iter().fold(S::zero(), |acc, &x| acc + x * x)
    }

    #[test]
    fn works_for_both_float_widths() {
        assert_eq!(sum_of_squares(&[1.0f64, 2.0, 3.0]), 14.0);
        assert_eq!(sum_of_squares(&[1.0f32, 2.0, 3.0]), 14.0);
    }
}
