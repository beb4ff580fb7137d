//! Numeric traits the rest of the crate is generic over.
//!
//! Pixel-level arithmetic (add, clip, distance) only needs [`Pixel`], which is
//! also satisfied by exact rationals. Everything that takes square roots,
//! exponentials or random samples needs a floating point [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Element type of an image buffer.
pub trait Pixel: Copy + PartialOrd + Num + Signed + Debug + Send + Sync + 'static {}

impl<T> Pixel for T where T: Copy + PartialOrd + Num + Signed + Debug + Send + Sync + 'static {}

/// Floating point scalar used for pixels and scores.
pub trait Scalar: Pixel + Float + FromPrimitive + ToPrimitive + Display + Default + Sum {
    /// Largest distance from the 1/255 grid still considered "on grid",
    /// in pixel units.
    fn grid_tolerance() -> Self;

    /// Widening/narrowing conversion; the values used here are always finite.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("float converts to f64")
    }
}

impl Scalar for f32 {
    fn grid_tolerance() -> Self {
        // several ulps at 1.0; f32 cannot hold k/255 to 1e-9
        64.0 * f32::EPSILON
    }
}

impl Scalar for f64 {
    fn grid_tolerance() -> Self {
        1e-9
    }
}
