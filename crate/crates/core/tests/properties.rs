use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tu1_core::norms::{slice_svt, soft_threshold, u0_norm, u1_norm, uinf_norm};
use tu1_core::solver::{update_penalties, Mask};
use tu1_core::transforms::dcm;
use tu1_core::{FamilySpec, RealTensor, SlicePair, TransformKind};

fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 2..=4)
}

fn random_tensor(shape: &[usize], seed: u64) -> RealTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unfold_fold_inverse(shape in shape_strategy(), seed in any::<u64>()) {
        let a = random_tensor(&shape, seed);
        for n in 0..shape.len() {
            let m = a.unfold(n).unwrap();
            prop_assert_eq!(m.nrows(), shape[n]);
            prop_assert_eq!(RealTensor::fold(&m, n, &shape).unwrap(), a.clone());
        }
    }

    #[test]
    fn orthonormal_mode_product_round_trip(shape in shape_strategy(), seed in any::<u64>(), mode in 0usize..4) {
        let a = random_tensor(&shape, seed);
        let n = mode % shape.len();
        let c = dcm(shape[n]).unwrap();
        let b = a.mode_product(&c, n).unwrap();
        prop_assert!((b.fro_norm() - a.fro_norm()).abs() <= 1e-12 * (1.0 + a.fro_norm()));
        let back = b.mode_product(&c.transpose(), n).unwrap();
        prop_assert!(back.max_abs_diff(&a).unwrap() <= 1e-12);
    }

    #[test]
    fn mask_projection_algebra(shape in shape_strategy(), seed in any::<u64>(), bits in any::<u64>()) {
        let a = random_tensor(&shape, seed);
        let len: usize = shape.iter().product();
        let observed: Vec<bool> = (0..len).map(|i| bits >> (i % 64) & 1 == 1).collect();
        let mask = Mask::from_bools(&shape, observed).unwrap();
        let p = mask.project(&a).unwrap();
        prop_assert_eq!(mask.project(&p).unwrap(), p.clone());
        let q = mask.project_complement(&a).unwrap();
        prop_assert_eq!(p.add(&q).unwrap(), a.clone());
        prop_assert_eq!(p.inner(&q).unwrap(), 0.0);
    }

    #[test]
    fn prox_operators_are_nonexpansive(shape in shape_strategy(), s1 in any::<u64>(), s2 in any::<u64>(), tau in 0.0f64..1.0) {
        let a = random_tensor(&shape, s1);
        let b = random_tensor(&shape, s2);
        let d = a.sub(&b).unwrap().fro_norm();
        let st = soft_threshold(&a, tau).sub(&soft_threshold(&b, tau)).unwrap().fro_norm();
        prop_assert!(st <= d + 1e-12);
        let pair = SlicePair::new(0, 1, shape.len()).unwrap();
        let sv = slice_svt(&a, pair, tau).unwrap().sub(&slice_svt(&b, pair, tau).unwrap()).unwrap().fro_norm();
        prop_assert!(sv <= d + 1e-10);
    }

    #[test]
    fn norm_relations(shape in shape_strategy(), seed in any::<u64>(), kind in 0usize..3) {
        let a = random_tensor(&shape, seed);
        let k = [TransformKind::Identity, TransformKind::Dcm, TransformKind::Dfm][kind];
        let fam = FamilySpec::uniform(shape.len(), k).build(&shape).unwrap();
        let (u0, u1, ui) = (u0_norm(&a, &fam).unwrap(), u1_norm(&a, &fam).unwrap(), uinf_norm(&a, &fam).unwrap());
        prop_assert!(u1 <= u0 as f64 * ui * (1.0 + 1e-12) + 1e-12);
        prop_assert!((fam.transform(&a).unwrap().norms().fro - a.fro_norm()).abs() <= 1e-10);
        let b = random_tensor(&shape, seed ^ 0x55);
        prop_assert!(a.inner(&b).unwrap() <= u1 * uinf_norm(&b, &fam).unwrap() + 1e-10);
    }

    #[test]
    fn family_round_trip(shape in shape_strategy(), seed in any::<u64>(), kinds in prop::collection::vec(0usize..4, 4)) {
        let a = random_tensor(&shape, seed);
        let all = [TransformKind::Identity, TransformKind::Dcm, TransformKind::Dfm, TransformKind::Random(seed)];
        let spec = (0..shape.len()).fold(FamilySpec::new(), |s, k| s.with(k + 1, all[kinds[k]]));
        let fam = spec.build(&shape).unwrap();
        let (back, imag) = fam.untransform::<f64>(&fam.transform(&a).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&a).unwrap() <= 1e-12);
        prop_assert!(imag <= 1e-12);
    }

    #[test]
    fn penalties_grow_monotonically_to_caps(mu in 1e-3f64..1.0, eta in 1e-3f64..1.0, rho in 1.01f64..2.0, steps in 1usize..200) {
        let (mu_bar, eta_bar) = (50.0, 20.0);
        let (mut m, mut e) = (mu, eta);
        for _ in 0..steps {
            let (m2, e2) = update_penalties(m, e, rho, rho, mu_bar, eta_bar);
            prop_assert!(m2 >= m && e2 >= e);
            prop_assert!(m2 <= mu_bar.max(mu) && e2 <= eta_bar.max(eta));
            (m, e) = (m2, e2);
        }
    }

    #[test]
    fn mask_permutation_tracks_tensor_permutation(shape in shape_strategy(), seed in any::<u64>()) {
        let a = random_tensor(&shape, seed);
        let mask = Mask::from_tensor(&a.map(|v| if v > 0.0 { 1.0 } else { 0.0 })).unwrap();
        let mode = shape.len() - 1;
        let perm: Vec<usize> = (0..shape[mode]).rev().collect();
        let lhs = mask.permute_mode(mode, &perm).unwrap().project(&a.permute_mode(mode, &perm).unwrap()).unwrap();
        let rhs = mask.project(&a).unwrap().permute_mode(mode, &perm).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}

#[test]
fn slice_svt_matches_matrix_svt_on_matrices() {
    let a = random_tensor(&[4, 3], 1);
    let m: DMatrix<f64> = a.unfold(0).unwrap();
    let pair = SlicePair::new(0, 1, 2).unwrap();
    let t = slice_svt(&a, pair, 0.3).unwrap();
    let s = tu1_core::norms::svt(&m, 0.3).unwrap();
    assert!((t.unfold(0).unwrap() - s).norm() < 1e-12);
}
