//! Fixed unitary transforms and per-mode transform families.
//!
//! A [`TransformFamily`] assigns each tensor mode one of: a fixed unitary
//! matrix, a learnable factor (owned by the solver, not applied here), or
//! the identity. The family defines the operator `U(A) = A x_k Û_k ...` over
//! the fixed modes, which is what the U0/U1/U∞ norms are measured through.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{AnyTensor, ComplexTensor, Tensor};

/// Tolerance on `‖ÛᴴÛ − I‖_F` accepted for fixed transforms.
pub const UNITARY_TOL: f64 = 1e-10;

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("transform size must be at least 1".into()));
    }
    Ok(())
}

/// Unitary DFT matrix, entries `ω^{jk} / √n` with `ω = exp(−2πi/n)`.
pub fn dfm(n: usize) -> Result<DMatrix<Complex64>> {
    check_size(n)?;
    let scale = 1.0 / (n as f64).sqrt();
    Ok(DMatrix::from_fn(n, n, |j, k| {
        // reduce the exponent first so large n keeps full phase accuracy
        let e = (j * k) % n;
        Complex64::from_polar(scale, -2.0 * PI * e as f64 / n as f64)
    }))
}

/// Orthonormal DCT-II matrix; row `k` is the k-th cosine atom.
pub fn dcm(n: usize) -> Result<DMatrix<f64>> {
    check_size(n)?;
    let nf = n as f64;
    Ok(DMatrix::from_fn(n, n, |k, j| {
        let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        c * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    }))
}

/// Haar-distributed orthogonal matrix, deterministic per seed.
pub fn random_orthogonal(n: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_size(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    Ok(haar_fix(g))
}

/// Haar-distributed unitary matrix, deterministic per seed.
pub fn random_unitary(n: usize, seed: u64) -> Result<DMatrix<Complex64>> {
    check_size(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    Ok(haar_fix(g))
}

/// Q from the QR factorization, with column phases fixed by diag(R).
fn haar_fix<T: Scalar>(g: DMatrix<T>) -> DMatrix<T> {
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        let d = r[(j, j)];
        let m = d.modulus();
        if m > 0.0 {
            let phase = d.unscale(m);
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    q
}

/// `‖MᴴM − I‖_F`.
pub fn unitarity_error<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let n = m.ncols();
    (m.adjoint() * m - DMatrix::<T>::identity(n, n)).norm()
}

/// A fixed transform matrix stored in its natural scalar type.
#[derive(Clone, Debug, PartialEq)]
pub enum FixedMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl FixedMatrix {
    pub fn size(&self) -> usize {
        match self {
            FixedMatrix::Real(m) => m.nrows(),
            FixedMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, FixedMatrix::Complex(_))
    }

    /// The matrix in scalar type `T`; `None` for a complex matrix and real `T`.
    pub fn to_scalar<T: Scalar>(&self) -> Option<DMatrix<T>> {
        match self {
            FixedMatrix::Real(m) => Some(m.map(T::from_real)),
            FixedMatrix::Complex(m) => {
                if T::KIND == crate::ScalarKind::Complex {
                    Some(m.map(|z| T::from_complex_lossy(z).0))
                } else {
                    None
                }
            }
        }
    }

    pub fn unitarity_error(&self) -> f64 {
        match self {
            FixedMatrix::Real(m) => unitarity_error(m),
            FixedMatrix::Complex(m) => unitarity_error(m),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModeTransform {
    Identity,
    Fixed(FixedMatrix),
    Learnable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformFamily {
    modes: Vec<ModeTransform>,
}

impl TransformFamily {
    pub fn new(modes: Vec<ModeTransform>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument("empty transform family".into()));
        }
        for (mode, t) in modes.iter().enumerate() {
            if let ModeTransform::Fixed(m) = t {
                let deviation = m.unitarity_error();
                if !(deviation <= UNITARY_TOL) {
                    return Err(Error::NotUnitary { mode, deviation });
                }
            }
        }
        Ok(Self { modes })
    }

    pub fn identity(order: usize) -> Self {
        Self {
            modes: vec![ModeTransform::Identity; order],
        }
    }

    pub fn order(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[ModeTransform] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> Option<&ModeTransform> {
        self.modes.get(k)
    }

    /// Learnable modes in ascending order.
    pub fn learnable_modes(&self) -> Vec<usize> {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t, ModeTransform::Learnable))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn fixed_modes(&self) -> Vec<usize> {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t, ModeTransform::Fixed(_)))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_complex(&self) -> bool {
        self.modes
            .iter()
            .any(|t| matches!(t, ModeTransform::Fixed(m) if m.is_complex()))
    }

    /// Same family with learnable modes treated as identity.
    pub fn without_learnable(&self) -> Self {
        Self {
            modes: self
                .modes
                .iter()
                .map(|t| match t {
                    ModeTransform::Learnable => ModeTransform::Identity,
                    t => t.clone(),
                })
                .collect(),
        }
    }

    pub fn check_shape(&self, shape: &[usize]) -> Result<()> {
        if shape.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "transform family of order {} for tensor of shape {:?}",
                self.order(),
                shape
            )));
        }
        for (k, t) in self.modes.iter().enumerate() {
            if let ModeTransform::Fixed(m) = t {
                if m.size() != shape[k] {
                    return Err(Error::DimensionMismatch(format!(
                        "mode {} transform is {}x{} but extent is {}",
                        k,
                        m.size(),
                        m.size(),
                        shape[k]
                    )));
                }
            }
        }
        Ok(())
    }

    fn apply_with<T: Scalar>(&self, a: &Tensor<T>, inverse: bool) -> Result<Tensor<T>> {
        self.check_shape(a.shape())?;
        let mut out = a.clone();
        for (k, t) in self.modes.iter().enumerate() {
            if let ModeTransform::Fixed(m) = t {
                let m = m.to_scalar::<T>().ok_or(Error::ComplexTransform)?;
                let m = if inverse { m.adjoint() } else { m };
                out = out.mode_product(&m, k)?;
            }
        }
        Ok(out)
    }

    /// `U(A)`: every fixed matrix applied along its mode. Fails with
    /// [`Error::ComplexTransform`] for a complex family and real `T`; use
    /// [`TransformFamily::transform`] to lift automatically.
    pub fn apply<T: Scalar>(&self, a: &Tensor<T>) -> Result<Tensor<T>> {
        self.apply_with(a, false)
    }

    /// `U⁻¹(A)`, using `Û⁻¹ = Ûᴴ`.
    pub fn apply_inverse<T: Scalar>(&self, a: &Tensor<T>) -> Result<Tensor<T>> {
        self.apply_with(a, true)
    }

    /// `U(A)` in whichever scalar type the family needs.
    pub fn transform<T: Scalar>(&self, a: &Tensor<T>) -> Result<AnyTensor> {
        if self.is_complex() && T::KIND == crate::ScalarKind::Real {
            Ok(AnyTensor::Complex(self.apply(&a.to_complex())?))
        } else {
            Ok(lift(self.apply(a)?))
        }
    }

    /// `U⁻¹` of a transformed tensor, converted back to `T`. Returns the
    /// largest imaginary part discarded by the conversion.
    pub fn untransform<T: Scalar>(&self, a: &AnyTensor) -> Result<(Tensor<T>, f64)> {
        match a {
            AnyTensor::Real(t) => {
                let back = self.apply_inverse(t)?;
                Ok((back.map(T::from_real), 0.0))
            }
            AnyTensor::Complex(t) => {
                let back: ComplexTensor = self.apply_inverse(t)?;
                Ok(Tensor::<T>::from_complex_lossy(&back))
            }
        }
    }
}

/// Wraps a generic tensor into [`AnyTensor`].
pub fn lift<T: Scalar>(t: Tensor<T>) -> AnyTensor {
    T::into_any(t)
}

/// A transform kind by name, as written in config files and on the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    Identity,
    Dfm,
    Dcm,
    /// Random orthogonal matrix with the given seed.
    Random(u64),
    Learnable,
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "identity" | "id" | "none" => TransformKind::Identity,
            "dfm" | "dft" => TransformKind::Dfm,
            "dcm" | "dct" => TransformKind::Dcm,
            "learnable" | "learn" => TransformKind::Learnable,
            "random" => TransformKind::Random(0),
            _ => match s.strip_prefix("random:") {
                Some(seed) => TransformKind::Random(
                    seed.parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad random seed in {s:?}")))?,
                ),
                None => return Err(Error::InvalidArgument(format!("unknown transform {s:?}"))),
            },
        })
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformKind::Identity => write!(f, "identity"),
            TransformKind::Dfm => write!(f, "dfm"),
            TransformKind::Dcm => write!(f, "dcm"),
            TransformKind::Random(s) => write!(f, "random:{s}"),
            TransformKind::Learnable => write!(f, "learnable"),
        }
    }
}

impl TransformKind {
    pub fn build(self, n: usize) -> Result<ModeTransform> {
        Ok(match self {
            TransformKind::Identity => ModeTransform::Identity,
            TransformKind::Learnable => ModeTransform::Learnable,
            TransformKind::Dfm => ModeTransform::Fixed(FixedMatrix::Complex(dfm(n)?)),
            TransformKind::Dcm => ModeTransform::Fixed(FixedMatrix::Real(dcm(n)?)),
            TransformKind::Random(seed) => ModeTransform::Fixed(FixedMatrix::Real(random_orthogonal(n, seed)?)),
        })
    }
}

/// Named per-mode transforms, e.g. `mode1=dfm,mode2=dfm,mode4=learnable`.
/// Modes are 1-based; unlisted modes are identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct FamilySpec {
    kinds: BTreeMap<usize, TransformKind>,
}

impl FamilySpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the kind of a 1-based mode.
    pub fn with(mut self, mode: usize, kind: TransformKind) -> Self {
        self.kinds.insert(mode, kind);
        self
    }

    /// `kind` on every mode `1..=order` (later `with` calls override).
    pub fn uniform(order: usize, kind: TransformKind) -> Self {
        Self {
            kinds: (1..=order).map(|k| (k, kind)).collect(),
        }
    }

    pub fn kind(&self, mode: usize) -> TransformKind {
        self.kinds.get(&mode).copied().unwrap_or(TransformKind::Identity)
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn build(&self, shape: &[usize]) -> Result<TransformFamily> {
        if let Some(&m) = self.kinds.keys().find(|&&m| m == 0 || m > shape.len()) {
            return Err(Error::ModeOutOfRange {
                mode: m,
                order: shape.len(),
            });
        }
        let modes = shape
            .iter()
            .enumerate()
            .map(|(k, &n)| self.kind(k + 1).build(n))
            .collect::<Result<Vec<_>>>()?;
        TransformFamily::new(modes)
    }
}

impl FromStr for FamilySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = FamilySpec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected modeK=kind, got {part:?}")))?;
            spec.kinds.insert(parse_mode_key(key)?, value.parse()?);
        }
        Ok(spec)
    }
}

fn parse_mode_key(key: &str) -> Result<usize> {
    let key = key.trim();
    let digits = key.strip_prefix("mode").unwrap_or(key);
    match digits.parse::<usize>() {
        Ok(m) if m >= 1 => Ok(m),
        _ => Err(Error::InvalidArgument(format!("bad mode key {key:?}"))),
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.kinds.iter().map(|(m, k)| format!("mode{m}={k}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl TryFrom<BTreeMap<String, String>> for FamilySpec {
    type Error = Error;

    fn try_from(map: BTreeMap<String, String>) -> Result<Self> {
        let mut spec = FamilySpec::new();
        for (k, v) in map {
            spec.kinds.insert(parse_mode_key(&k)?, v.parse()?);
        }
        Ok(spec)
    }
}

impl From<FamilySpec> for BTreeMap<String, String> {
    fn from(spec: FamilySpec) -> Self {
        spec.kinds
            .into_iter()
            .map(|(m, k)| (format!("mode{m}"), k.to_string()))
            .collect()
    }
}
