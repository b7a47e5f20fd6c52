use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Stopping tolerance for fixed-point iterations at this precision.
    fn fixed_point_tol() -> Self;

    /// Converts an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn fixed_point_tol() -> f64 {
        1e-12
    }
}

impl Scalar for f32 {
    fn fixed_point_tol() -> f32 {
        1e-5
    }
}
