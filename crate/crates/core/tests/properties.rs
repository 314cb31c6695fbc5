mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sipca::fantope::{deflated_fantope_project, fantope_project, water_fill, Projector};
use sipca::metrics::{mad, median, subspace_error, support_scores};
use sipca::mp::MarchenkoPastur;
use sipca::prox::hierarchical_prox;
use sipca::tuning::lambda_grid;
use sipca::{BlockLayout, SymBlockMatrix, WeightMatrix};

fn instance(seed: u64, p: usize, views: usize) -> (BlockLayout, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = random_layout(p, views.min(p), &mut rng);
    (layout, random_symmetric(p, 3.0, &mut rng))
}

fn unit(seed: u64, p: usize, r: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(p, r, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q().columns(0, r).into_owned()
}

fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn water_fill_sums_to_one(values in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let (_, w) = water_fill(&values).unwrap();
        let total: f64 = w.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn fantope_projection_is_feasible_and_idempotent(seed in any::<u64>(), p in 1usize..12) {
        let (layout, a) = instance(seed, p, 1);
        let h = fantope_project(&SymBlockMatrix::new(layout, a).unwrap()).unwrap();
        prop_assert!((h.trace() - 1.0).abs() < 1e-9);
        for g in eigenvalues(h.matrix()) {
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&g));
        }
        let again = fantope_project(&h).unwrap();
        prop_assert!((again.matrix() - h.matrix()).norm() < 1e-8);
    }

    #[test]
    fn deflated_projection_has_no_overlap(seed in any::<u64>(), p in 3usize..12, k in 1usize..3) {
        let k = k.min(p - 1);
        let (layout, a) = instance(seed, p, 1);
        let pi = Projector::from_basis(&layout, unit(seed ^ 1, p, k)).unwrap();
        let h = deflated_fantope_project(&SymBlockMatrix::new(layout, a).unwrap(), &pi).unwrap();
        prop_assert!(h.dot(pi.matrix()).abs() < 1e-9);
        prop_assert!((h.trace() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prox_is_symmetric_shrinking_and_sign_preserving(
        seed in any::<u64>(), p in 2usize..14, views in 1usize..4, l1 in 0.0f64..1.0, group in 0.0f64..1.0,
    ) {
        let (layout, a) = instance(seed, p, views);
        let w = WeightMatrix::size_balanced(&layout);
        let x = hierarchical_prox(&SymBlockMatrix::new(layout, a.clone()).unwrap(), l1, group, &w).unwrap();
        let x = x.matrix();
        prop_assert_eq!(x, &x.transpose());
        for (xi, ai) in x.iter().zip(a.iter()) {
            prop_assert!(xi.abs() <= ai.abs() + 1e-12);
            prop_assert!(*xi == 0.0 || xi.signum() == ai.signum());
        }
    }

    #[test]
    fn subspace_error_is_bounded_and_sign_invariant(seed in any::<u64>(), p in 2usize..15, r in 1usize..3) {
        let r = r.min(p);
        let v = unit(seed, p, r);
        let u = unit(seed.wrapping_add(7), p, r);
        let e = subspace_error(&v, &u).unwrap();
        prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&e));
        let mut flipped = u.clone();
        flipped.column_mut(0).neg_mut();
        prop_assert!((subspace_error(&v, &flipped).unwrap() - e).abs() < 1e-12);
        prop_assert!(subspace_error(&v, &v).unwrap() < 1e-7);
    }

    #[test]
    fn support_scores_are_rates(
        truth in prop::collection::btree_set(0usize..30, 0..30),
        est in prop::collection::btree_set(0usize..30, 0..30),
    ) {
        let t: Vec<usize> = truth.into_iter().collect();
        let e: Vec<usize> = est.into_iter().collect();
        let s = support_scores(&t, &e, 30).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.sensitivity) && (0.0..=1.0).contains(&s.specificity));
        let exact = support_scores(&t, &t, 30).unwrap();
        prop_assert_eq!((exact.sensitivity, exact.specificity), (1.0, 1.0));
    }

    #[test]
    fn median_and_mad_match_sorting(values in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let sorted_median = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            // nearest rank
            s[s.len().div_ceil(2) - 1]
        };
        let m = sorted_median(&values);
        prop_assert_eq!(median(&values).unwrap(), m);
        let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
        prop_assert!((mad(&values).unwrap() - sorted_median(&dev)).abs() < 1e-9);
    }

    #[test]
    fn lambda_grid_is_increasing(seed in any::<u64>(), p in 2usize..10, n in 2usize..12) {
        let (layout, a) = instance(seed, p, 2);
        let s = SymBlockMatrix::new(layout.clone(), a).unwrap();
        let grid = lambda_grid(&s, &Projector::empty(&layout), n).unwrap();
        prop_assert!(grid.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(grid.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn mp_quantile_inverts_cdf(ratio in 0.05f64..3.0, u in 0.05f64..0.95) {
        let mp = MarchenkoPastur::new(ratio).unwrap();
        let x = mp.quantile(u).unwrap();
        if u > mp.atom() {
            prop_assert!((mp.cdf(x) - u).abs() < 1e-6);
        }
    }
}

#[test]
fn prox_at_zero_penalty_is_identity() {
    let (layout, a) = instance(3, 6, 2);
    let w = WeightMatrix::size_balanced(&layout);
    let x = hierarchical_prox(&SymBlockMatrix::new(layout, a.clone()).unwrap(), 0.0, 0.0, &w).unwrap();
    assert_eq!(x.matrix(), &a);
}
