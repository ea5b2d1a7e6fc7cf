//! Scalar abstraction for the math core.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the tensor calculus is generic over: `f32` or `f64`.
///
/// Residual thresholds in this crate assume `f64` precision; `f32` is useful
/// for smoke-testing genericity, not for the 1e-9 verification gates.
pub trait Real: Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static {
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
