//! Slice-low-rank (TDSL) and sparse (TDST) decompositions of a fully
//! observed tensor.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, polar_unitary};
use crate::norms::{u0_norm, SlicePair};
use crate::scalar::Scalar;
use crate::solver::{apply_factors, reconstruct, Factors};
use crate::tensor::{AnyTensor, Tensor};
use crate::transforms::{ModeTransform, TransformFamily};

/// Stop when one alternation lowers the residual by less than this
/// (relative to `‖A‖_F`).
pub const TDSL_IMPROVEMENT_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct TdslResult<T> {
    /// Core in the learned domain: `A ≈ Z1 ×_n U_nᴴ`, and every slice of
    /// `U(Z1)` has rank at most `r`.
    pub z1: Tensor<T>,
    pub factors: Factors<T>,
    pub r: usize,
    /// `‖A − Z1 ×_n U_nᴴ‖_F` for the returned core and factors.
    pub residual: f64,
    /// Residual after every alternation.
    pub history: Vec<f64>,
}

fn truncate_slices(t: &AnyTensor, pair: SlicePair, r: usize) -> Result<AnyTensor> {
    fn go<T: Scalar>(t: &Tensor<T>, pair: SlicePair, r: usize) -> Result<Tensor<T>> {
        t.map_slices(pair.as_tuple(), |s| linalg::truncate_rank(&s, r))
    }
    Ok(match t {
        AnyTensor::Real(t) => AnyTensor::Real(go(t, pair, r)?),
        AnyTensor::Complex(t) => AnyTensor::Complex(go(t, pair, r)?),
    })
}

/// Alternates a per-slice rank-`r` truncation of `U(A ×_n U_n)` with
/// Procrustes updates of each learnable `U_n`. Both steps are exact block
/// minimizers, so the residual never increases.
pub fn tdsl_decompose<T: Scalar>(
    a: &Tensor<T>,
    fam: &TransformFamily,
    pair: SlicePair,
    r: usize,
    iters: usize,
) -> Result<TdslResult<T>> {
    fam.check_shape(a.shape())?;
    let pair = SlicePair::new(pair.k1, pair.k2, a.order())?;
    let max_r = a.shape()[pair.k1].min(a.shape()[pair.k2]);
    if r == 0 || r > max_r {
        return Err(Error::InvalidArgument(format!("rank {r} outside 1..={max_r}")));
    }
    for k in [pair.k1, pair.k2] {
        if matches!(fam.mode(k), Some(ModeTransform::Learnable)) {
            return Err(Error::Config(format!("slice mode {} cannot be learnable", k + 1)));
        }
    }
    let mut factors: Factors<T> = fam
        .learnable_modes()
        .into_iter()
        .map(|k| (k, DMatrix::identity(a.shape()[k], a.shape()[k])))
        .collect();
    let tol = TDSL_IMPROVEMENT_TOL * a.fro_norm().max(1.0);
    let mut history = Vec::new();
    let mut z1 = Tensor::zeros(a.shape())?;
    let mut residual = f64::INFINITY;

    for _ in 0..iters.max(1) {
        let c = apply_factors(a, &factors, false)?;
        let (core, _) = fam.untransform::<T>(&truncate_slices(&fam.transform(&c)?, pair, r)?)?;
        z1 = core;
        for i in 0..factors.len() {
            let mode = factors[i].0;
            let others: Vec<_> = factors.iter().filter(|(k, _)| *k != mode).cloned().collect();
            let b = apply_factors(a, &others, false)?;
            factors[i].1 = polar_unitary(&z1.mode_gram(&b, mode)?)?;
        }
        let next = a.sub(&reconstruct(&z1, &factors)?)?.fro_norm();
        let improvement = residual - next;
        residual = next;
        history.push(residual);
        if factors.is_empty() || improvement < tol {
            break;
        }
    }
    Ok(TdslResult {
        z1,
        factors,
        r,
        residual,
        history,
    })
}

/// Cumulative energy captured by the largest transform coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub kept_fraction: f64,
    pub energy_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdstSparsity {
    pub u0: usize,
    pub u1: f64,
    pub energy_profile: Vec<EnergyPoint>,
}

pub const ENERGY_FRACTIONS: [f64; 8] = [0.001, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Sparsity statistics of `U(A)` under a family without learnable modes.
pub fn tdst_sparsity<T: Scalar>(a: &Tensor<T>, fam: &TransformFamily) -> Result<TdstSparsity> {
    if !fam.learnable_modes().is_empty() {
        return Err(Error::Config("sparsity report needs a fully fixed family".into()));
    }
    let t = fam.transform(a)?;
    let mut sq: Vec<f64> = match &t {
        AnyTensor::Real(t) => t.data().iter().map(|x| x * x).collect(),
        AnyTensor::Complex(t) => t.data().iter().map(|x| x.norm_sqr()).collect(),
    };
    sq.sort_by(|x, y| y.total_cmp(x));
    let total: f64 = sq.iter().sum();
    let mut prefix = Vec::with_capacity(sq.len());
    let mut acc = 0.0;
    for v in &sq {
        acc += v;
        prefix.push(acc);
    }
    let n = sq.len();
    let energy_profile = ENERGY_FRACTIONS
        .iter()
        .map(|&f| {
            let kept = ((f * n as f64).ceil() as usize).clamp(1, n);
            EnergyPoint {
                kept_fraction: kept as f64 / n as f64,
                energy_fraction: if total > 0.0 { prefix[kept - 1] / total } else { 1.0 },
            }
        })
        .collect();
    Ok(TdstSparsity {
        u0: u0_norm(a, fam)?,
        u1: t.norms().l1,
        energy_profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{dcm, dfm, random_orthogonal, unitarity_error, FixedMatrix};
    use crate::RealTensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> RealTensor {
        RealTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn family(shape: &[usize], learn: &[usize]) -> TransformFamily {
        TransformFamily::new(
            shape
                .iter()
                .enumerate()
                .map(|(k, &n)| match k {
                    0 | 1 => ModeTransform::Identity,
                    _ if learn.contains(&k) => ModeTransform::Learnable,
                    _ => ModeTransform::Fixed(FixedMatrix::Real(dcm(n).unwrap())),
                })
                .collect(),
        )
        .unwrap()
    }

    /// `U⁻¹` of a tensor whose `(0, 1)`-slices are random rank-`r` matrices.
    fn model_class(shape: &[usize], fam: &TransformFamily, r: usize, rng: &mut ChaCha8Rng) -> RealTensor {
        let noise = random(shape, rng);
        let low = noise
            .map_slices((0, 1), |s| {
                let u = DMatrix::from_fn(s.nrows(), r, |_, _| rng.random_range(-1.0..1.0));
                let v = DMatrix::from_fn(r, s.ncols(), |_, _| rng.random_range(-1.0..1.0));
                Ok(u * v)
            })
            .unwrap();
        fam.without_learnable().apply_inverse(&low).unwrap()
    }

    #[test]
    fn exact_model_class_fixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = [6, 5, 4, 3];
        let fam = family(&shape, &[3]);
        let a = model_class(&shape, &fam, 2, &mut rng);
        let res = tdsl_decompose(&a, &fam, SlicePair::new(0, 1, 4).unwrap(), 2, 20).unwrap();
        assert!(res.residual <= 1e-8, "{:?}", res.history);
        let rec = reconstruct(&res.z1, &res.factors).unwrap();
        assert!((a.sub(&rec).unwrap().fro_norm() - res.residual).abs() < 1e-12);
    }

    #[test]
    fn full_rank_has_no_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = [4, 3, 5];
        let fam = family(&shape, &[2]);
        let a = random(&shape, &mut rng);
        let res = tdsl_decompose(&a, &fam, SlicePair::new(0, 1, 3).unwrap(), 3, 5).unwrap();
        assert!(res.residual <= 1e-8);
    }

    #[test]
    fn residual_is_monotone_and_factors_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = [5, 5, 4, 4];
        let fam = family(&shape, &[2, 3]);
        let a = random(&shape, &mut rng);
        let res = tdsl_decompose(&a, &fam, SlicePair::new(0, 1, 4).unwrap(), 2, 50).unwrap();
        for w in res.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", res.history);
        }
        for (_, u) in &res.factors {
            assert!(unitarity_error(u) <= 1e-8);
        }
        let z1t = fam.apply(&res.z1).unwrap();
        for s in z1t.slices((0, 1)).unwrap() {
            let sv = linalg::singular_values(&s).unwrap();
            assert!(sv.len() < 3 || sv[2] <= 1e-8 * sv[0].max(1e-300));
        }
    }

    #[test]
    fn learns_a_hidden_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = [6, 6, 5];
        let fam = family(&shape, &[2]);
        let core = model_class(&shape, &fam, 1, &mut rng);
        let q = random_orthogonal(5, 9).unwrap();
        let a = core.mode_product(&q.transpose(), 2).unwrap();
        let res = tdsl_decompose(&a, &fam, SlicePair::new(0, 1, 3).unwrap(), 1, 200).unwrap();
        assert!(res.history[0] >= res.residual);
    }

    #[test]
    fn rank_and_family_errors() {
        let shape = [3, 4, 2];
        let a = RealTensor::zeros(&shape).unwrap();
        let fam = family(&shape, &[2]);
        let pair = SlicePair::new(0, 1, 3).unwrap();
        assert!(tdsl_decompose(&a, &fam, pair, 0, 5).is_err());
        assert!(tdsl_decompose(&a, &fam, pair, 4, 5).is_err());
        let bad = SlicePair::new(0, 2, 3).unwrap();
        assert!(tdsl_decompose(&a, &fam, bad, 1, 5).is_err());
    }

    #[test]
    fn sparsity_of_delta_and_dcm_fixture() {
        let mut delta = RealTensor::zeros(&[3, 4, 5]).unwrap();
        delta.set(&[1, 2, 3], 1.0).unwrap();
        let s = tdst_sparsity(&delta, &TransformFamily::identity(3)).unwrap();
        assert_eq!(s.u0, 1);
        assert_eq!(s.u1, 1.0);
        assert_eq!(s.energy_profile.last().unwrap().energy_fraction, 1.0);

        // two rank-one terms built from cosine atoms
        let n = 8;
        let c = dcm(n).unwrap();
        let mut a = RealTensor::zeros(&[n, n, n]).unwrap();
        for (i, j, k, w) in [(1, 2, 3, 1.5), (4, 0, 6, -0.7)] {
            let term =
                RealTensor::from_fn(&[n, n, n], |idx| w * c[(i, idx[0])] * c[(j, idx[1])] * c[(k, idx[2])]).unwrap();
            a = a.add(&term).unwrap();
        }
        let fam = TransformFamily::new(vec![ModeTransform::Fixed(FixedMatrix::Real(c)); 3]).unwrap();
        let s = tdst_sparsity(&a, &fam).unwrap();
        assert!(s.u0 <= 2, "{}", s.u0);
        assert!(s.energy_profile[1].energy_fraction > 1.0 - 1e-12);
    }

    #[test]
    fn u1_invariant_under_joint_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(&[5, 4], &mut rng);
        let f = dfm(5).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let ap = a.permute_mode(0, &perm).unwrap();
        // permuting the data rows and the transform columns together
        let fp = DMatrix::from_fn(5, 5, |i, j| f[(i, perm[j])]);
        let fam = TransformFamily::new(vec![
            ModeTransform::Fixed(FixedMatrix::Complex(f)),
            ModeTransform::Identity,
        ])
        .unwrap();
        let famp = TransformFamily::new(vec![
            ModeTransform::Fixed(FixedMatrix::Complex(fp)),
            ModeTransform::Identity,
        ])
        .unwrap();
        let s = tdst_sparsity(&a, &fam).unwrap();
        let sp = tdst_sparsity(&ap, &famp).unwrap();
        assert!((s.u1 - sp.u1).abs() < 1e-12 * s.u1);
    }
}
