//! Dense h-order tensors and the index algebra used throughout the crate.
//!
//! Storage is row-major: the last mode varies fastest. Modes are 0-based in
//! the Rust API; the CLI and config files use 1-based mode numbers.
//!
//! The mode-n unfolding places mode `n` on the rows. Columns enumerate the
//! remaining modes with the *first* remaining mode varying fastest, i.e.
//! column `j = sum_{k != n} i_k * J_k` with `J_k = prod_{m < k, m != n} I_m`.

pub mod io;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarKind};

/// Highest supported tensor order.
pub const MAX_ORDER: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

pub type RealTensor = Tensor<f64>;
pub type ComplexTensor = Tensor<Complex64>;

/// Entrywise norms. `l0` counts entries with nonzero modulus exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ElementwiseNorms {
    pub l0: usize,
    pub l1: f64,
    pub linf: f64,
    pub fro: f64,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_ORDER {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "order must be between 1 and 8",
        });
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "every extent must be at least 1",
        });
    }
    Ok(shape.iter().product())
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected = check_shape(&shape)?;
        if data.len() != expected {
            return Err(Error::DataLength {
                shape,
                expected,
                got: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let n = check_shape(shape)?;
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            data.push(f(&idx));
            increment(&mut idx, shape);
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// A matrix viewed as an order-2 tensor.
    pub fn from_matrix(m: &DMatrix<T>) -> Self {
        let (r, c) = m.shape();
        let data = (0..r * c).map(|k| m[(k / c, k % c)]).collect();
        Self {
            shape: vec![r, c],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn kind(&self) -> ScalarKind {
        T::KIND
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.order() || index.iter().zip(&self.shape).any(|(i, n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                shape: self.shape.clone(),
            });
        }
        Ok(index.iter().zip(self.strides()).map(|(i, s)| i * s).sum())
    }

    pub fn get(&self, index: &[usize]) -> Result<T> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: T) -> Result<()> {
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    /// Multi-index of a storage offset.
    pub fn index_of(&self, mut offset: usize) -> Vec<usize> {
        let mut idx = vec![0; self.order()];
        for k in (0..self.order()).rev() {
            idx[k] = offset % self.shape[k];
            offset /= self.shape[k];
        }
        idx
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|x| x.scale(alpha))
    }

    /// Real inner product `Re sum conj(a) * b`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.conjugate() * b).real())
            .sum())
    }

    pub fn norms(&self) -> ElementwiseNorms {
        let mut out = ElementwiseNorms::default();
        let mut sq = 0.0;
        for &x in &self.data {
            let m = x.modulus();
            if m > 0.0 {
                out.l0 += 1;
            }
            out.l1 += m;
            sq += m * m;
            if m > out.linf {
                out.linf = m;
            }
        }
        out.fro = sq.sqrt();
        out
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt()
    }

    pub fn max_modulus(&self) -> f64 {
        self.data.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    /// `max |a - b|` over entries.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).modulus())
            .fold(0.0, f64::max))
    }

    pub fn to_complex(&self) -> ComplexTensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x.to_complex()).collect(),
        }
    }

    /// Converts from complex, returning the largest discarded imaginary part.
    pub fn from_complex_lossy(c: &ComplexTensor) -> (Self, f64) {
        let mut residue = 0.0f64;
        let data = c
            .data
            .iter()
            .map(|&z| {
                let (v, im) = T::from_complex_lossy(z);
                residue = residue.max(im);
                v
            })
            .collect();
        (
            Tensor {
                shape: c.shape.clone(),
                data,
            },
            residue,
        )
    }

    /// Sizes of the (before, mode, after) blocks of the row-major layout.
    fn block_dims(&self, mode: usize) -> (usize, usize, usize) {
        let outer = self.shape[..mode].iter().product();
        let inner = self.shape[mode + 1..].iter().product();
        (outer, self.shape[mode], inner)
    }

    pub fn unfold(&self, mode: usize) -> Result<DMatrix<T>> {
        self.check_mode(mode)?;
        let rows = self.shape[mode];
        let cols = self.len() / rows;
        let col_strides = unfold_col_strides(&self.shape, mode);
        let mut m = DMatrix::zeros(rows, cols);
        let mut idx = vec![0usize; self.order()];
        for &x in &self.data {
            let col: usize = idx.iter().zip(&col_strides).map(|(i, s)| i * s).sum();
            m[(idx[mode], col)] = x;
            increment(&mut idx, &self.shape);
        }
        Ok(m)
    }

    pub fn fold(m: &DMatrix<T>, mode: usize, shape: &[usize]) -> Result<Self> {
        let mut out = Self::zeros(shape)?;
        out.check_mode(mode)?;
        let rows = shape[mode];
        let cols = out.len() / rows;
        if m.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch(format!(
                "cannot fold {}x{} matrix into shape {:?} along mode {}",
                m.nrows(),
                m.ncols(),
                shape,
                mode
            )));
        }
        let col_strides = unfold_col_strides(shape, mode);
        let mut idx = vec![0usize; shape.len()];
        for x in out.data.iter_mut() {
            let col: usize = idx.iter().zip(&col_strides).map(|(i, s)| i * s).sum();
            *x = m[(idx[mode], col)];
            increment(&mut idx, shape);
        }
        Ok(out)
    }

    /// Mode-n product `self x_n u`: every mode-`mode` fiber is multiplied by
    /// `u` (J x I_n). The result has extent J along `mode`.
    pub fn mode_product(&self, u: &DMatrix<T>, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if u.ncols() != self.shape[mode] {
            return Err(Error::DimensionMismatch(format!(
                "matrix with {} columns applied to mode {} of extent {}",
                u.ncols(),
                mode,
                self.shape[mode]
            )));
        }
        let (outer, n_in, inner) = self.block_dims(mode);
        let n_out = u.nrows();
        // row-major copy of u
        let coef: Vec<T> = (0..n_out * n_in).map(|k| u[(k / n_in, k % n_in)]).collect();
        let mut shape = self.shape.clone();
        shape[mode] = n_out;
        let mut data = vec![T::zero(); outer * n_out * inner];
        for o in 0..outer {
            let src = &self.data[o * n_in * inner..(o + 1) * n_in * inner];
            let dst = &mut data[o * n_out * inner..(o + 1) * n_out * inner];
            if inner == 1 {
                for j in 0..n_out {
                    let row = &coef[j * n_in..(j + 1) * n_in];
                    dst[j] = row.iter().zip(src).fold(T::zero(), |acc, (&c, &x)| acc + c * x);
                }
            } else {
                for j in 0..n_out {
                    let out_row = &mut dst[j * inner..(j + 1) * inner];
                    for m in 0..n_in {
                        let c = coef[j * n_in + m];
                        if c == T::zero() {
                            continue;
                        }
                        let in_row = &src[m * inner..(m + 1) * inner];
                        for (y, &x) in out_row.iter_mut().zip(in_row) {
                            *y += c * x;
                        }
                    }
                }
            }
        }
        Ok(Self { shape, data })
    }

    /// `self_(mode) * other_(mode)^H` without materializing either unfolding.
    pub fn mode_gram(&self, other: &Self, mode: usize) -> Result<DMatrix<T>> {
        self.check_mode(mode)?;
        if self.order() != other.order()
            || self
                .shape
                .iter()
                .zip(&other.shape)
                .enumerate()
                .any(|(k, (a, b))| k != mode && a != b)
        {
            return Err(Error::DimensionMismatch(format!(
                "mode-{} gram of shapes {:?} and {:?}",
                mode, self.shape, other.shape
            )));
        }
        let (outer, ni, inner) = self.block_dims(mode);
        let nj = other.shape[mode];
        let mut g = DMatrix::zeros(ni, nj);
        for o in 0..outer {
            let a = &self.data[o * ni * inner..(o + 1) * ni * inner];
            let b = &other.data[o * nj * inner..(o + 1) * nj * inner];
            for i in 0..ni {
                let ar = &a[i * inner..(i + 1) * inner];
                for j in 0..nj {
                    let br = &b[j * inner..(j + 1) * inner];
                    let s = ar
                        .iter()
                        .zip(br)
                        .fold(T::zero(), |acc, (&x, &y)| acc + x * y.conjugate());
                    g[(i, j)] += s;
                }
            }
        }
        Ok(g)
    }

    fn check_pair(&self, pair: (usize, usize)) -> Result<()> {
        if pair.0 == pair.1 || pair.0 >= self.order() || pair.1 >= self.order() {
            return Err(Error::InvalidPair(pair.0, pair.1));
        }
        Ok(())
    }

    /// Storage offsets of element (0, 0) of every `(k1, k2)`-slice, with the
    /// remaining modes enumerated in row-major order.
    fn slice_bases(&self, pair: (usize, usize)) -> Vec<usize> {
        let strides = self.strides();
        let rest: Vec<usize> = (0..self.order()).filter(|&k| k != pair.0 && k != pair.1).collect();
        let rest_shape: Vec<usize> = rest.iter().map(|&k| self.shape[k]).collect();
        let count: usize = rest_shape.iter().product();
        let mut idx = vec![0usize; rest.len()];
        let mut bases = Vec::with_capacity(count);
        for _ in 0..count {
            bases.push(idx.iter().zip(&rest).map(|(i, &k)| i * strides[k]).sum());
            increment(&mut idx, &rest_shape);
        }
        bases
    }

    /// Number of `(k1, k2)`-slices.
    pub fn slice_count(&self, pair: (usize, usize)) -> Result<usize> {
        self.check_pair(pair)?;
        Ok(self.len() / (self.shape[pair.0] * self.shape[pair.1]))
    }

    /// The slice with the two modes not listed in `fixed` left free. Rows
    /// follow the lower free mode.
    pub fn slice(&self, fixed: &[(usize, usize)]) -> Result<DMatrix<T>> {
        let mut is_fixed = vec![false; self.order()];
        let mut index = vec![0usize; self.order()];
        for &(mode, i) in fixed {
            self.check_mode(mode)?;
            if is_fixed[mode] {
                return Err(Error::InvalidArgument(format!("mode {mode} fixed twice")));
            }
            if i >= self.shape[mode] {
                return Err(Error::IndexOutOfRange {
                    index: vec![i],
                    shape: vec![self.shape[mode]],
                });
            }
            is_fixed[mode] = true;
            index[mode] = i;
        }
        let free: Vec<usize> = (0..self.order()).filter(|&k| !is_fixed[k]).collect();
        if free.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "a slice needs exactly two free modes, got {}",
                free.len()
            )));
        }
        let base = self.offset(&index)?;
        Ok(self.slice_at(base, (free[0], free[1])))
    }

    fn slice_at(&self, base: usize, pair: (usize, usize)) -> DMatrix<T> {
        let s = self.strides();
        let (s1, s2) = (s[pair.0], s[pair.1]);
        DMatrix::from_fn(self.shape[pair.0], self.shape[pair.1], |a, b| {
            self.data[base + a * s1 + b * s2]
        })
    }

    /// All `(k1, k2)`-slices, remaining modes in row-major order.
    pub fn slices(&self, pair: (usize, usize)) -> Result<Vec<DMatrix<T>>> {
        self.check_pair(pair)?;
        Ok(self
            .slice_bases(pair)
            .into_iter()
            .map(|b| self.slice_at(b, pair))
            .collect())
    }

    /// Replaces every `(k1, k2)`-slice by `f(slice)`.
    pub fn map_slices(
        &self,
        pair: (usize, usize),
        mut f: impl FnMut(DMatrix<T>) -> Result<DMatrix<T>>,
    ) -> Result<Self> {
        self.check_pair(pair)?;
        let s = self.strides();
        let (s1, s2) = (s[pair.0], s[pair.1]);
        let (r, c) = (self.shape[pair.0], self.shape[pair.1]);
        let mut out = self.clone();
        for base in self.slice_bases(pair) {
            let m = f(self.slice_at(base, pair))?;
            if m.shape() != (r, c) {
                return Err(Error::DimensionMismatch("slice map changed slice shape".into()));
            }
            for a in 0..r {
                for b in 0..c {
                    out.data[base + a * s1 + b * s2] = m[(a, b)];
                }
            }
        }
        Ok(out)
    }

    /// Reorders the slices along `mode`: output slice `i` is input slice `perm[i]`.
    pub fn permute_mode(&self, mode: usize, perm: &[usize]) -> Result<Self> {
        self.check_mode(mode)?;
        let n = self.shape[mode];
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument(format!("not a permutation of 0..{n}")));
        }
        let (outer, _, inner) = self.block_dims(mode);
        let mut data = Vec::with_capacity(self.len());
        for o in 0..outer {
            for &p in perm {
                let start = (o * n + p) * inner;
                data.extend_from_slice(&self.data[start..start + inner]);
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }
}

impl ComplexTensor {
    /// Real part, provided every imaginary part is at most `rel_tol` times the
    /// largest modulus.
    pub fn into_real(self, rel_tol: f64) -> Result<RealTensor> {
        let scale = self.max_modulus();
        let (re, residue) = RealTensor::from_complex_lossy(&self);
        if residue > rel_tol * scale {
            return Err(Error::ComplexResidue(residue / scale.max(f64::MIN_POSITIVE)));
        }
        Ok(re)
    }
}

/// Column strides of the mode-`mode` unfolding, zero on `mode` itself.
fn unfold_col_strides(shape: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for k in 0..shape.len() {
        if k != mode {
            strides[k] = acc;
            acc *= shape[k];
        }
    }
    strides
}

/// Row-major multi-index increment (wraps to zero after the last index).
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

/// A tensor whose scalar kind is only known at run time (file I/O, CLI).
#[derive(Clone, Debug, PartialEq)]
pub enum AnyTensor {
    Real(RealTensor),
    Complex(ComplexTensor),
}

impl AnyTensor {
    pub fn kind(&self) -> ScalarKind {
        match self {
            AnyTensor::Real(_) => ScalarKind::Real,
            AnyTensor::Complex(_) => ScalarKind::Complex,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::Real(t) => t.shape(),
            AnyTensor::Complex(t) => t.shape(),
        }
    }

    pub fn norms(&self) -> ElementwiseNorms {
        match self {
            AnyTensor::Real(t) => t.norms(),
            AnyTensor::Complex(t) => t.norms(),
        }
    }

    pub fn to_complex(&self) -> ComplexTensor {
        match self {
            AnyTensor::Real(t) => t.to_complex(),
            AnyTensor::Complex(t) => t.clone(),
        }
    }

    /// Real view; complex tensors must have negligible imaginary parts.
    pub fn into_real(self, rel_tol: f64) -> Result<RealTensor> {
        match self {
            AnyTensor::Real(t) => Ok(t),
            AnyTensor::Complex(t) => t.into_real(rel_tol),
        }
    }
}

impl From<RealTensor> for AnyTensor {
    fn from(t: RealTensor) -> Self {
        AnyTensor::Real(t)
    }
}

impl From<ComplexTensor> for AnyTensor {
    fn from(t: ComplexTensor) -> Self {
        AnyTensor::Complex(t)
    }
}
