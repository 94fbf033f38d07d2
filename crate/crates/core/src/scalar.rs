use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar the numerical core is generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Default KKT tolerance for the NNLS dual check.
    fn nnls_tolerance() -> Self;

    /// Relative threshold below which a pivot is treated as rank deficient.
    fn rank_epsilon() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    fn nnls_tolerance() -> Self {
        1e-8
    }

    fn rank_epsilon() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn nnls_tolerance() -> Self {
        1e-4
    }

    fn rank_epsilon() -> Self {
        1e-5
    }
}
