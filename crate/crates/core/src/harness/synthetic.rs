use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::Mask;
use crate::tensor::RealTensor;
use crate::transforms::{dcm, random_orthogonal};

/// Where the factor columns come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorSource {
    /// Cosine atoms: `R` distinct rows of the DCT matrix.
    #[default]
    Dcm,
    /// Columns of a seeded random orthogonal matrix.
    RandomOrthogonal,
}

/// `M = G0 ×_1 U_1 ⋯ ×_h U_h` with `G0 ~ N(0,1)` of size `R^h` and each
/// `U_k` an `I_k × R` matrix of orthonormal columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub shape: Vec<usize>,
    pub rank: usize,
    pub seed: u64,
    #[serde(default)]
    pub factors: FactorSource,
}

impl SyntheticSpec {
    pub fn new(shape: &[usize], rank: usize, seed: u64) -> Self {
        Self {
            shape: shape.to_vec(),
            rank,
            seed,
            factors: FactorSource::Dcm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        RealTensor::zeros(&self.shape)?;
        let min = self.shape.iter().copied().min().unwrap_or(0);
        if self.rank == 0 || self.rank > min {
            return Err(Error::InvalidArgument(format!(
                "rank {} must lie in 1..={min} for shape {:?}",
                self.rank, self.shape
            )));
        }
        Ok(())
    }
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<RealTensor> {
    spec.validate()?;
    let r = spec.rank;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut m = RealTensor::from_fn(&vec![r; spec.shape.len()], |_| StandardNormal.sample(&mut rng))?;
    for (k, &n) in spec.shape.iter().enumerate() {
        let basis = match spec.factors {
            FactorSource::Dcm => dcm(n)?.transpose(),
            FactorSource::RandomOrthogonal => random_orthogonal(n, spec.seed ^ (0x9e37_79b9 + k as u64))?,
        };
        let cols = sample(&mut rng, n, r).into_vec();
        let u = basis.select_columns(&cols);
        m = m.mode_product(&u, k)?;
    }
    Ok(m)
}

/// Exactly `round(p · N)` observed entries, drawn uniformly without
/// replacement.
pub fn gen_mask(shape: &[usize], p: f64, seed: u64) -> Result<Mask> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("sampling rate {p} outside [0, 1]")));
    }
    let n = RealTensor::zeros(shape)?.len();
    let count = (p * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = vec![false; n];
    for i in sample(&mut rng, n, count) {
        observed[i] = true;
    }
    Mask::from_bools(shape, observed)
}

/// Uniformly random permutation of `0..n`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(&mut rng, n, n).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use crate::transforms::TransformFamily;
    use crate::{ModeTransform, TransformKind};

    #[test]
    fn rank_one_unfolding() {
        let m = gen_synthetic(&SyntheticSpec::new(&[4, 4, 4], 1, 3)).unwrap();
        let sv = singular_values(&m.unfold(0).unwrap()).unwrap();
        assert!(sv[1] / sv[0] < 1e-10);
    }

    #[test]
    fn unfoldings_have_rank_at_most_r() {
        let m = gen_synthetic(&SyntheticSpec::new(&[6, 5, 7], 3, 4)).unwrap();
        for k in 0..3 {
            let sv = singular_values(&m.unfold(k).unwrap()).unwrap();
            assert!(sv[3] / sv[0] < 1e-10, "mode {k}: {sv:?}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SyntheticSpec::new(&[5, 5, 5], 2, 9);
        assert_eq!(gen_synthetic(&spec).unwrap(), gen_synthetic(&spec).unwrap());
        let other = SyntheticSpec {
            seed: 10,
            ..spec.clone()
        };
        assert_ne!(gen_synthetic(&spec).unwrap(), gen_synthetic(&other).unwrap());
    }

    #[test]
    fn sparse_under_dcm_family() {
        let spec = SyntheticSpec::new(&[8, 8, 8], 2, 1);
        let m = gen_synthetic(&spec).unwrap();
        let fam = TransformFamily::new(
            (0..3)
                .map(|_| TransformKind::Dcm.build(8).unwrap())
                .collect::<Vec<ModeTransform>>(),
        )
        .unwrap();
        assert!(crate::norms::u0_norm(&m, &fam).unwrap() <= 8);
    }

    #[test]
    fn rank_validation() {
        assert!(gen_synthetic(&SyntheticSpec::new(&[4, 3, 4], 4, 0)).is_err());
        assert!(gen_synthetic(&SyntheticSpec::new(&[4, 3, 4], 0, 0)).is_err());
    }

    #[test]
    fn thirty_per_mode_regime() {
        let spec = SyntheticSpec::new(&[30, 30, 30, 30], 5, 0);
        let m = gen_synthetic(&spec).unwrap();
        assert_eq!(m.shape(), &[30, 30, 30, 30]);
    }

    #[test]
    fn mask_counts() {
        assert_eq!(gen_mask(&[3, 4], 1.0, 0).unwrap(), Mask::full(&[3, 4]).unwrap());
        assert_eq!(gen_mask(&[100, 100], 0.5, 0).unwrap().count(), 5000);
        assert_eq!(gen_mask(&[7, 3], 0.3, 0).unwrap().count(), 6);
        assert_ne!(
            gen_mask(&[100, 100], 0.5, 1).unwrap(),
            gen_mask(&[100, 100], 0.5, 2).unwrap()
        );
        assert_eq!(
            gen_mask(&[10, 10], 0.4, 5).unwrap(),
            gen_mask(&[10, 10], 0.4, 5).unwrap()
        );
        assert!(gen_mask(&[3], 1.5, 0).is_err());
    }

    #[test]
    fn permutation_is_a_bijection() {
        let mut p = random_permutation(50, 3);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
