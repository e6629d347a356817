//! Transform-domain norms and their proximal operators.
//!
//! All norms are measured on `U(Z)`, the tensor after every fixed transform
//! of the family has been applied. Learnable modes count as identity here.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::tensor::{AnyTensor, Tensor};
use crate::transforms::TransformFamily;

/// Relative threshold below which a transformed coefficient counts as zero
/// in [`u0_norm`] and in subgradient supports.
pub const U0_REL_TOL: f64 = 1e-12;

/// The two matrix modes `(k1, k2)` of slice-wise norms (0-based, distinct).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicePair {
    pub k1: usize,
    pub k2: usize,
}

impl SlicePair {
    pub fn new(k1: usize, k2: usize, order: usize) -> Result<Self> {
        if k1 == k2 || k1 >= order || k2 >= order {
            return Err(Error::InvalidPair(k1, k2));
        }
        Ok(Self { k1, k2 })
    }

    /// From 1-based mode numbers as used on the CLI.
    pub fn from_one_based(k1: usize, k2: usize, order: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::InvalidPair(k1, k2));
        }
        Self::new(k1 - 1, k2 - 1, order)
    }

    pub fn as_tuple(self) -> (usize, usize) {
        (self.k1, self.k2)
    }
}

pub fn u0_norm<T: Scalar>(z: &Tensor<T>, fam: &TransformFamily) -> Result<usize> {
    let t = fam.transform(z)?;
    Ok(count_support(&t))
}

fn count_support(t: &AnyTensor) -> usize {
    fn count<T: Scalar>(t: &Tensor<T>) -> usize {
        let cut = U0_REL_TOL * t.max_modulus();
        t.data().iter().filter(|x| x.modulus() > cut).count()
    }
    match t {
        AnyTensor::Real(t) => count(t),
        AnyTensor::Complex(t) => count(t),
    }
}

/// `‖Z‖_{U,1} = ‖U(Z)‖₁`.
pub fn u1_norm<T: Scalar>(z: &Tensor<T>, fam: &TransformFamily) -> Result<f64> {
    Ok(fam.transform(z)?.norms().l1)
}

/// `‖Z‖_{U,∞} = ‖U(Z)‖_∞`.
pub fn uinf_norm<T: Scalar>(z: &Tensor<T>, fam: &TransformFamily) -> Result<f64> {
    Ok(fam.transform(z)?.norms().linf)
}

fn slice_singular_values(t: &AnyTensor, pair: SlicePair) -> Result<Vec<Vec<f64>>> {
    fn go<T: Scalar>(t: &Tensor<T>, pair: SlicePair) -> Result<Vec<Vec<f64>>> {
        t.slices(pair.as_tuple())?
            .iter()
            .map(|s| Ok(linalg::singular_values(s)?.iter().copied().collect()))
            .collect()
    }
    match t {
        AnyTensor::Real(t) => go(t, pair),
        AnyTensor::Complex(t) => go(t, pair),
    }
}

/// Sum over all `(k1, k2)`-slices of `U(Z)` of the slice nuclear norms.
pub fn slice_nuclear_norm<T: Scalar>(z: &Tensor<T>, fam: &TransformFamily, pair: SlicePair) -> Result<f64> {
    let sv = slice_singular_values(&fam.transform(z)?, pair)?;
    Ok(sv.iter().map(|s| s.iter().sum::<f64>()).sum())
}

/// Largest spectral norm over the `(k1, k2)`-slices of `U(A)`.
pub fn slice_spectral_norm<T: Scalar>(a: &Tensor<T>, fam: &TransformFamily, pair: SlicePair) -> Result<f64> {
    let sv = slice_singular_values(&fam.transform(a)?, pair)?;
    Ok(sv.iter().map(|s| s.first().copied().unwrap_or(0.0)).fold(0.0, f64::max))
}

/// Complex-safe soft thresholding `z ↦ z · max(1 − τ/|z|, 0)`.
pub fn soft_threshold<T: Scalar>(a: &Tensor<T>, tau: f64) -> Tensor<T> {
    a.map(|z| shrink(z, tau))
}

#[inline]
pub fn shrink<T: Scalar>(z: T, tau: f64) -> T {
    let m = z.modulus();
    if m <= tau {
        T::zero()
    } else {
        z.scale(1.0 - tau / m)
    }
}

/// Prox of the nuclear norm on a matrix.
pub fn svt<T: Scalar>(m: &DMatrix<T>, tau: f64) -> Result<DMatrix<T>> {
    linalg::svt(m, tau)
}

/// [`svt`] applied to every `(k1, k2)`-slice.
pub fn slice_svt<T: Scalar>(a: &Tensor<T>, pair: SlicePair, tau: f64) -> Result<Tensor<T>> {
    a.map_slices(pair.as_tuple(), |s| linalg::svt(&s, tau))
}

pub(crate) fn soft_threshold_any(t: &AnyTensor, tau: f64) -> AnyTensor {
    match t {
        AnyTensor::Real(t) => AnyTensor::Real(soft_threshold(t, tau)),
        AnyTensor::Complex(t) => AnyTensor::Complex(soft_threshold(t, tau)),
    }
}

/// Slice-wise SVT that also returns the nuclear-norm sum of the result.
pub(crate) fn slice_svt_any(t: &AnyTensor, pair: SlicePair, tau: f64) -> Result<(AnyTensor, f64)> {
    fn go<T: Scalar>(t: &Tensor<T>, pair: SlicePair, tau: f64) -> Result<(Tensor<T>, f64)> {
        let mut nuclear = 0.0;
        let out = t.map_slices(pair.as_tuple(), |s| {
            let d = linalg::svd(&s)?;
            let (u, v_t) = (&d.u, &d.v_t);
            let mut m = DMatrix::zeros(s.nrows(), s.ncols());
            for (i, &sv) in d.singular_values.iter().enumerate() {
                if sv > tau {
                    nuclear += sv - tau;
                    m += u.column(i) * v_t.row(i) * T::from_real(sv - tau);
                }
            }
            Ok(m)
        })?;
        Ok((out, nuclear))
    }
    Ok(match t {
        AnyTensor::Real(t) => {
            let (o, n) = go(t, pair, tau)?;
            (AnyTensor::Real(o), n)
        }
        AnyTensor::Complex(t) => {
            let (o, n) = go(t, pair, tau)?;
            (AnyTensor::Complex(o), n)
        }
    })
}

fn sign<T: Scalar>(z: T, cut: f64) -> T {
    let m = z.modulus();
    if m > cut {
        z.unscale(m)
    } else {
        T::zero()
    }
}

fn sign_any(t: &AnyTensor) -> AnyTensor {
    fn go<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
        let cut = U0_REL_TOL * t.max_modulus();
        t.map(|z| sign(z, cut))
    }
    match t {
        AnyTensor::Real(t) => AnyTensor::Real(go(t)),
        AnyTensor::Complex(t) => AnyTensor::Complex(go(t)),
    }
}

/// `U⁻¹(sgn(U(A)))`: the subgradient of `‖·‖_{U,1}` at `A` with zero
/// off-support component. Also the equality witness for the U1/U∞ duality
/// pairing: `⟨A, W⟩ = ‖A‖_{U,1}` and `‖W‖_{U,∞} ≤ 1`.
pub fn u1_subgradient_witness<T: Scalar>(a: &Tensor<T>, fam: &TransformFamily) -> Result<Tensor<T>> {
    let (w, _) = fam.untransform(&sign_any(&fam.transform(a)?))?;
    Ok(w)
}

/// Whether `g` lies in the subdifferential of `‖·‖_{U,1}` at `a`: with
/// `F = g − witness`, `U(F)` must vanish on the support of `U(A)` and
/// `‖F‖_{U,∞} ≤ 1`, both up to `tol`.
pub fn is_u1_subgradient<T: Scalar>(a: &Tensor<T>, g: &Tensor<T>, fam: &TransformFamily, tol: f64) -> Result<bool> {
    let w = u1_subgradient_witness(a, fam)?;
    let f = fam.transform(&g.sub(&w)?)?.to_complex();
    let ta = fam.transform(a)?.to_complex();
    let cut = U0_REL_TOL * ta.max_modulus();
    let mut max_off = 0.0f64;
    for (x, fx) in ta.data().iter().zip(f.data()) {
        if x.norm() > cut {
            if fx.norm() > tol {
                return Ok(false);
            }
        } else {
            max_off = max_off.max(fx.norm());
        }
    }
    Ok(max_off <= 1.0 + tol)
}

/// Equality witness for the slice nuclear/spectral duality:
/// `U⁻¹` of the per-slice `U_r V_rᴴ` of `U(A)`.
pub fn slice_nuclear_witness<T: Scalar>(a: &Tensor<T>, fam: &TransformFamily, pair: SlicePair) -> Result<Tensor<T>> {
    fn go<S: Scalar>(t: &Tensor<S>, pair: SlicePair) -> Result<Tensor<S>> {
        let scale = t.max_modulus();
        t.map_slices(pair.as_tuple(), |m| {
            let s = linalg::svd(&m)?;
            let (u, v_t) = (&s.u, &s.v_t);
            let mut out = DMatrix::zeros(m.nrows(), m.ncols());
            for (i, &sv) in s.singular_values.iter().enumerate() {
                if sv > U0_REL_TOL * scale * 1e3 {
                    out += u.column(i) * v_t.row(i);
                }
            }
            Ok(out)
        })
    }
    let t = fam.transform(a)?;
    let w = match &t {
        AnyTensor::Real(t) => AnyTensor::Real(go(t, pair)?),
        AnyTensor::Complex(t) => AnyTensor::Complex(go::<Complex64>(t, pair)?),
    };
    Ok(fam.untransform(&w)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{FamilySpec, TransformKind};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn dcm_family(shape: &[usize]) -> TransformFamily {
        FamilySpec::uniform(shape.len(), TransformKind::Dcm)
            .build(shape)
            .unwrap()
    }

    #[test]
    fn u0_counts() {
        let id = TransformFamily::identity(2);
        assert_eq!(u0_norm(&Tensor::<f64>::zeros(&[4, 4]).unwrap(), &id).unwrap(), 0);
        let mut delta = Tensor::<f64>::zeros(&[4, 4]).unwrap();
        delta.set(&[1, 2], 1.0).unwrap();
        assert_eq!(u0_norm(&delta, &id).unwrap(), 1);
        // DFT of a delta: every coefficient has modulus 1/4
        let fam = FamilySpec::uniform(2, TransformKind::Dfm).build(&[4, 4]).unwrap();
        let oracle = fam.transform(&delta).unwrap().to_complex();
        assert!(oracle.data().iter().all(|z| (z.norm() - 0.25).abs() < 1e-12));
        assert_eq!(u0_norm(&delta, &fam).unwrap(), 16);
    }

    #[test]
    fn u1_and_uinf_under_identity_are_elementwise() {
        let a = random(&[3, 4, 2], 1);
        let id = TransformFamily::identity(3);
        assert_relative_eq!(u1_norm(&a, &id).unwrap(), a.norms().l1);
        assert_relative_eq!(uinf_norm(&a, &id).unwrap(), a.norms().linf);
        let z = Tensor::<f64>::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(u1_norm(&z, &id).unwrap(), 0.0);
        assert_eq!(uinf_norm(&z, &id).unwrap(), 0.0);
    }

    #[test]
    fn u1_matches_sequential_mode_product_oracle() {
        let a = random(&[3, 3, 3], 2);
        let d = crate::transforms::dcm(3).unwrap();
        let mut t = a.clone();
        for k in 0..3 {
            t = t.mode_product(&d, k).unwrap();
        }
        let oracle: f64 = t.data().iter().map(|x| x.abs()).sum();
        assert_relative_eq!(
            u1_norm(&a, &dcm_family(&[3, 3, 3])).unwrap(),
            oracle,
            max_relative = 1e-12
        );
    }

    #[test]
    fn slice_nuclear_single_slice_and_rank_one_stack() {
        let m = random(&[4, 3], 3);
        let id = TransformFamily::identity(2);
        let pair = SlicePair::new(0, 1, 2).unwrap();
        let oracle: f64 = linalg::singular_values(&m.unfold(0).unwrap()).unwrap().iter().sum();
        assert_relative_eq!(slice_nuclear_norm(&m, &id, pair).unwrap(), oracle, max_relative = 1e-12);

        // five slices, each e1 e1ᵀ
        let mut t = Tensor::<f64>::zeros(&[3, 3, 5]).unwrap();
        for k in 0..5 {
            t.set(&[0, 0, k], 1.0).unwrap();
        }
        let id3 = TransformFamily::identity(3);
        let pair = SlicePair::new(0, 1, 3).unwrap();
        assert_relative_eq!(slice_nuclear_norm(&t, &id3, pair).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn slice_nuclear_matches_per_slice_svd() {
        let a = random(&[4, 4, 3], 4);
        let fam = FamilySpec::new().with(3, TransformKind::Dcm).build(a.shape()).unwrap();
        let pair = SlicePair::new(0, 1, 3).unwrap();
        let t = fam.apply(&a).unwrap();
        let mut oracle = 0.0;
        for k in 0..3 {
            let s = t.slice(&[(2, k)]).unwrap();
            oracle += linalg::singular_values(&s).unwrap().iter().sum::<f64>();
        }
        assert!((slice_nuclear_norm(&a, &fam, pair).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn slice_spectral_simple_values() {
        let pair = SlicePair::new(0, 1, 3).unwrap();
        let id = TransformFamily::identity(3);
        let z = Tensor::<f64>::zeros(&[2, 2, 3]).unwrap();
        assert_eq!(slice_spectral_norm(&z, &id, pair).unwrap(), 0.0);
        let eye = Tensor::<f64>::from_fn(&[3, 3, 2], |i| if i[0] == i[1] { 1.0 } else { 0.0 }).unwrap();
        assert_relative_eq!(slice_spectral_norm(&eye, &id, pair).unwrap(), 1.0, epsilon = 1e-12);
        assert!(SlicePair::new(1, 1, 3).is_err());
        assert!(SlicePair::new(0, 3, 3).is_err());
    }

    #[test]
    fn scalar_shrinkage() {
        assert_eq!(shrink(3.0, 1.0), 2.0);
        assert_eq!(shrink(-0.5, 1.0), 0.0);
        assert_eq!(shrink(-3.0, 1.0), -2.0);
        let z = shrink(Complex64::new(3.0, 4.0), 1.0);
        assert!((z - Complex64::new(3.0, 4.0) * 0.8).norm() < 1e-15);
    }

    #[test]
    fn soft_threshold_beats_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a: f64 = rng.random_range(-3.0..3.0);
            let tau: f64 = rng.random_range(0.05..2.0);
            let obj = |x: f64| tau * x.abs() + 0.5 * (x - a).powi(2);
            let got = soft_threshold(&Tensor::new(vec![1], vec![a]).unwrap(), tau).data()[0];
            let best = (0..=20_000)
                .map(|i| -4.0 + 8.0 * i as f64 / 20_000.0)
                .map(obj)
                .fold(f64::INFINITY, f64::min);
            assert!(obj(got) <= best + 1e-12);
        }
    }

    #[test]
    fn u1_uinf_duality_with_witness() {
        for seed in 0..20 {
            let a = random(&[3, 4, 2], 100 + seed);
            let b = random(&[3, 4, 2], 200 + seed);
            let fam = FamilySpec::new()
                .with(1, TransformKind::Dcm)
                .with(2, TransformKind::Dfm)
                .build(a.shape())
                .unwrap();
            let bound = u1_norm(&a, &fam).unwrap() * uinf_norm(&b, &fam).unwrap();
            assert!(a.inner(&b).unwrap() <= bound + 1e-12);
            let w = u1_subgradient_witness(&a, &fam).unwrap();
            assert_relative_eq!(uinf_norm(&w, &fam).unwrap(), 1.0, max_relative = 1e-10);
            assert_relative_eq!(a.inner(&w).unwrap(), u1_norm(&a, &fam).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn slice_duality_with_witness() {
        let pair = SlicePair::new(0, 2, 3).unwrap();
        for seed in 0..10 {
            let a = random(&[3, 2, 4], 300 + seed);
            let b = random(&[3, 2, 4], 400 + seed);
            let fam = FamilySpec::new().with(2, TransformKind::Dfm).build(a.shape()).unwrap();
            let nuc = slice_nuclear_norm(&a, &fam, pair).unwrap();
            assert!(a.inner(&b).unwrap() <= nuc * slice_spectral_norm(&b, &fam, pair).unwrap() + 1e-12);
            let w = slice_nuclear_witness(&a, &fam, pair).unwrap();
            assert_relative_eq!(slice_spectral_norm(&w, &fam, pair).unwrap(), 1.0, max_relative = 1e-10);
            assert_relative_eq!(a.inner(&w).unwrap(), nuc, max_relative = 1e-10);
        }
    }

    #[test]
    fn subgradient_witness_and_membership() {
        let a = random(&[3, 3], 6);
        let id = TransformFamily::identity(2);
        let w = u1_subgradient_witness(&a, &id).unwrap();
        assert!(w.data().iter().zip(a.data()).all(|(s, x)| *s == x.signum()));
        assert!(is_u1_subgradient(&a, &w, &id, 1e-12).unwrap());
        let mut bad = w.clone();
        bad.data_mut()[0] *= -1.0;
        assert!(!is_u1_subgradient(&a, &bad, &id, 1e-12).unwrap());

        // zero tensor: any F with ‖F‖_{U,∞} ≤ 1 is a subgradient
        let fam = dcm_family(&[3, 3]);
        let zero = Tensor::<f64>::zeros(&[3, 3]).unwrap();
        let mut f = random(&[3, 3], 7);
        let s = uinf_norm(&f, &fam).unwrap();
        f = f.scale(1.0 / s);
        assert!(is_u1_subgradient(&zero, &f, &fam, 1e-12).unwrap());
        assert!(!is_u1_subgradient(&zero, &f.scale(1.5), &fam, 1e-12).unwrap());
    }

    #[test]
    fn prox_nonexpansive() {
        for seed in 0..20 {
            let a = random(&[4, 3], 500 + seed);
            let b = random(&[4, 3], 600 + seed);
            let d = a.sub(&b).unwrap().fro_norm();
            let st = soft_threshold(&a, 0.3)
                .sub(&soft_threshold(&b, 0.3))
                .unwrap()
                .fro_norm();
            assert!(st <= d + 1e-12);
            let (ma, mb) = (a.unfold(0).unwrap(), b.unfold(0).unwrap());
            let sv = (svt(&ma, 0.3).unwrap() - svt(&mb, 0.3).unwrap()).norm();
            assert!(sv <= d + 1e-12);
        }
    }
}
