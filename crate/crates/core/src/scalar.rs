//! Scalar abstraction: all numerics are generic over a real scalar type.

use nalgebra::RealField;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable throughout the library (`f32`, `f64`).
pub trait Scalar: RealField + Float + FromPrimitive + ToPrimitive + Copy {}

impl<T> Scalar for T where T: RealField + Float + FromPrimitive + ToPrimitive + Copy {}

/// Convert an `f64` literal (tolerances, defaults) into the working scalar.
#[inline]
pub fn lit<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("literal not representable in scalar type")
}

/// Lossy view of a scalar as `f64`, used for diagnostics and serialization.
#[inline]
pub fn as_f64<S: Scalar>(v: S) -> f64 {
    v.to_f64().expect("scalar not representable as f64")
}
