//! Scalar abstraction: every numerical kernel in this crate is generic over a
//! floating point type implementing [`Scalar`].

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable in all grid and quadrature kernels.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + core::iter::Sum + core::fmt::Debug + core::fmt::Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range for scalar type")
    }

    /// Conversion to `f64` for reporting and error messages.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
