//! Scalar trait bounds used across the crate.
//!
//! Exterior algebra, small dense matrices and polynomial evaluation only need
//! ring operations with a sign, so they are generic over [`Scalar`]. Anything
//! that takes logs, exponentials or square roots is generic over [`Real`],
//! instantiated as `f64` everywhere in the experiment paths.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Signed};

/// Signed ring scalar: exact integers (`i64`, `i128`), floats, or
/// `BigRational` for exact constructed targets.
pub trait Scalar: Signed + PartialOrd + Clone + Debug {}

impl<T> Scalar for T where T: Signed + PartialOrd + Clone + Debug {}

/// Floating-point scalar (`f32` or `f64`).
pub trait Real: Scalar + Float + FromPrimitive + Copy {
    fn cast_f64(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 conversion")
    }
    fn cast_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize conversion")
    }
}

impl<T> Real for T where T: Scalar + Float + FromPrimitive + Copy {}
