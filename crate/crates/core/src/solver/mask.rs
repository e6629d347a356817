use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{row_major_strides, RealTensor, Tensor};

/// The set of observed entries, stored as a boolean tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    shape: Vec<usize>,
    observed: Vec<bool>,
    count: usize,
}

impl Mask {
    pub fn from_bools(shape: &[usize], observed: Vec<bool>) -> Result<Self> {
        let n: usize = RealTensor::zeros(shape)?.len();
        if observed.len() != n {
            return Err(Error::DataLength {
                shape: shape.to_vec(),
                expected: n,
                got: observed.len(),
            });
        }
        let count = observed.iter().filter(|&&b| b).count();
        Ok(Self {
            shape: shape.to_vec(),
            observed,
            count,
        })
    }

    pub fn full(shape: &[usize]) -> Result<Self> {
        let n = RealTensor::zeros(shape)?.len();
        Self::from_bools(shape, vec![true; n])
    }

    pub fn empty(shape: &[usize]) -> Result<Self> {
        let n = RealTensor::zeros(shape)?.len();
        Self::from_bools(shape, vec![false; n])
    }

    /// From a list of multi-indices. Out-of-range and duplicate indices are errors.
    pub fn from_indices(shape: &[usize], indices: &[Vec<usize>]) -> Result<Self> {
        let mut mask = Self::empty(shape)?;
        let strides = row_major_strides(shape);
        for idx in indices {
            if idx.len() != shape.len() || idx.iter().zip(shape).any(|(i, n)| i >= n) {
                return Err(Error::IndexOutOfRange {
                    index: idx.clone(),
                    shape: shape.to_vec(),
                });
            }
            let off: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            if std::mem::replace(&mut mask.observed[off], true) {
                return Err(Error::InvalidArgument(format!("duplicate index {idx:?}")));
            }
            mask.count += 1;
        }
        Ok(mask)
    }

    /// Entries with a nonzero value are observed.
    pub fn from_tensor(t: &RealTensor) -> Result<Self> {
        Self::from_bools(t.shape(), t.data().iter().map(|&x| x != 0.0).collect())
    }

    /// 1.0 on observed entries, 0.0 elsewhere.
    pub fn to_tensor(&self) -> RealTensor {
        RealTensor::new(
            self.shape.clone(),
            self.observed.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask shape is valid")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `|I| / prod I_k`.
    pub fn sampling_rate(&self) -> f64 {
        self.count as f64 / self.observed.len() as f64
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.observed
    }

    pub fn is_observed(&self, offset: usize) -> bool {
        self.observed[offset]
    }

    fn check<T: Scalar>(&self, a: &Tensor<T>) -> Result<()> {
        if a.shape() != self.shape.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "mask shape {:?} vs tensor shape {:?}",
                self.shape,
                a.shape()
            )));
        }
        Ok(())
    }

    /// `Ψ_I(A)`: keeps observed entries and zeroes the rest.
    pub fn project<T: Scalar>(&self, a: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(a)?;
        let mut out = a.clone();
        for (x, &b) in out.data_mut().iter_mut().zip(&self.observed) {
            if !b {
                *x = T::zero();
            }
        }
        Ok(out)
    }

    /// `Ψ_{Iᶜ}(A)`.
    pub fn project_complement<T: Scalar>(&self, a: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(a)?;
        let mut out = a.clone();
        for (x, &b) in out.data_mut().iter_mut().zip(&self.observed) {
            if b {
                *x = T::zero();
            }
        }
        Ok(out)
    }

    /// Reorders the mask along `mode` the same way as [`Tensor::permute_mode`].
    pub fn permute_mode(&self, mode: usize, perm: &[usize]) -> Result<Self> {
        let t = self.to_tensor().permute_mode(mode, perm)?;
        Self::from_tensor(&t)
    }
}

/// `Ψ_I(A)`.
pub fn psi_project<T: Scalar>(a: &Tensor<T>, mask: &Mask) -> Result<Tensor<T>> {
    mask.project(a)
}
