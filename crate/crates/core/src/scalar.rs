use std::fmt::Debug;

use nalgebra::ComplexField;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::tensor::{AnyTensor, Tensor};

/// Whether a tensor carries real or complex entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Real,
    Complex,
}

/// Element type of a [`Tensor`](crate::Tensor): `f64` or `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Default + Debug + Send + Sync + 'static {
    const KIND: ScalarKind;

    fn to_complex(self) -> Complex64;

    /// Drops the imaginary part for real scalars. The second value is the
    /// discarded imaginary magnitude (always zero for complex targets).
    fn from_complex_lossy(c: Complex64) -> (Self, f64);

    fn into_any(t: Tensor<Self>) -> AnyTensor;
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real;

    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    #[inline]
    fn from_complex_lossy(c: Complex64) -> (Self, f64) {
        (c.re, c.im.abs())
    }

    fn into_any(t: Tensor<Self>) -> AnyTensor {
        AnyTensor::Real(t)
    }
}

impl Scalar for Complex64 {
    const KIND: ScalarKind = ScalarKind::Complex;

    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }

    #[inline]
    fn from_complex_lossy(c: Complex64) -> (Self, f64) {
        (c, 0.0)
    }

    fn into_any(t: Tensor<Self>) -> AnyTensor {
        AnyTensor::Complex(t)
    }
}
