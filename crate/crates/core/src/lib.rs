//! Tensor completion with fixed and learnable unitary transforms.
//!
//! The crate provides a dense h-order [`Tensor`] type with unfold/fold and
//! mode products, transform families mixing fixed unitary matrices (DFT,
//! DCT, random orthogonal) with learnable factors, the transform-domain
//! U0/U1/U∞ and slice-wise nuclear/spectral norms, the proximal ADMM solvers
//! for the U1-norm and slice-wise low-rank completion models, an alternating
//! slice-low-rank decomposition, and an experiment harness (synthetic data,
//! masks, metrics, phase sweeps, image stacks).

pub mod decomposition;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod norms;
pub mod scalar;
pub mod solver;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use norms::SlicePair;
pub use scalar::{Scalar, ScalarKind};
pub use tensor::{AnyTensor, ComplexTensor, ElementwiseNorms, RealTensor, Tensor};
pub use transforms::{FamilySpec, ModeTransform, TransformFamily, TransformKind};
