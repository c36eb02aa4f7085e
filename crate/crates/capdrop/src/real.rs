//! Scalar abstraction shared by the field algebra.

use num_traits::{Float, FloatConst, NumCast};
use rustfft::FftNum;

/// Floating-point scalar usable by the spectral core (`f32` or `f64`).
pub trait Real: Float + FloatConst + FftNum + Default + std::fmt::Display {
    /// Converts a double literal into this scalar.
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("literal representable in scalar type")
    }
}

impl Real for f64 {}
impl Real for f32 {}
