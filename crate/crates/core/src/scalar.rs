//! Scalar abstractions shared by the symbolic and numerical layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

/// Coefficient field for polynomial and jet arithmetic.
///
/// Implemented for `f32`, `f64` and exact rationals (`BigRational`), so Lie
/// brackets and Taylor recursions can be carried out exactly when the input
/// frame has rational coefficients.
pub trait Scalar:
    Num
    + NumAssign
    + Signed
    + Clone
    + Debug
    + Display
    + PartialOrd
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion used for residuals and reporting.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite value representable in the scalar type")
    }
}

impl<T> Scalar for T where
    T: Num
        + NumAssign
        + Signed
        + Clone
        + Debug
        + Display
        + PartialOrd
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// Floating point scalars used by the integrators.
pub trait Real: Scalar + Float + Copy {}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn is_scalar<T: Scalar>() {}
    fn is_real<T: Real>() {}

    #[test]
    fn scalar_impls() {
        is_scalar::<f64>();
        is_scalar::<f32>();
        is_scalar::<BigRational>();
        is_real::<f32>();
        is_real::<f64>();
    }

    #[test]
    fn lossy_roundtrip() {
        let r = BigRational::from_f64_lossy(0.25);
        assert_eq!(r.to_f64_lossy(), 0.25);
    }
}
