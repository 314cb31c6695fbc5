mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sipca::denoise::{denoise, NoiseSource};
use sipca::fantope::{deflated_fantope_project, fantope_project, Projector};
use sipca::prox::{hierarchical_prox, kkt_residual};
use sipca::simulate::SimulationSetup;
use sipca::solver::{fit_sequential, solve_level, SolverKind};
use sipca::tuning::{fit_with_rule, lambda_max, LambdaReference, PenaltyRule};
use sipca::{AdmmConfig, BlockLayout, PenaltyConfig, SymBlockMatrix, WeightMatrix};

fn random_basis(p: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, k, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q().columns(0, k).into_owned()
}

#[test]
fn fantope_projection_matches_dykstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..25 {
        let p = rng.random_range(2..=8);
        let layout = BlockLayout::single(p).unwrap();
        let a = random_symmetric(p, 2.0, &mut rng);
        let h = fantope_project(&SymBlockMatrix::new(layout, a.clone()).unwrap()).unwrap();
        let oracle = dykstra_fantope(&a, None, 200_000);
        assert!((h.matrix() - &oracle).norm() < 1e-5, "p={p} gap {}", (h.matrix() - &oracle).norm());
    }
}

#[test]
fn deflated_projection_matches_dykstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..25 {
        let p = rng.random_range(3..=8);
        let k = rng.random_range(1..p - 1);
        let layout = BlockLayout::single(p).unwrap();
        let basis = random_basis(p, k, &mut rng);
        let pi = Projector::from_basis(&layout, basis).unwrap();
        let a = random_symmetric(p, 2.0, &mut rng);
        let h = deflated_fantope_project(&SymBlockMatrix::new(layout, a.clone()).unwrap(), &pi).unwrap();
        let oracle = dykstra_fantope(&a, Some(pi.matrix().matrix()), 200_000);
        assert!((h.matrix() - &oracle).norm() < 1e-5, "p={p} k={k} gap {} dh {} do {}", (h.matrix() - &oracle).norm(), (h.matrix() - &a).norm(), (&oracle - &a).norm());
    }
}

#[test]
fn prox_matches_dual_oracle_and_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..60 {
        let p = rng.random_range(2..=12);
        let views = rng.random_range(2..=3.min(p));
        let layout = random_layout(p, views, &mut rng);
        let a = random_symmetric(p, 1.0, &mut rng);
        let (l1, group) = (rng.random_range(0.0..0.4), rng.random_range(0.0..0.3));
        let w = WeightMatrix::size_balanced(&layout);
        let x = hierarchical_prox(&SymBlockMatrix::new(layout.clone(), a.clone()).unwrap(), l1, group, &w).unwrap();
        let oracle = prox_dual_oracle(&a, &layout, l1, group, &w, 200_000);
        let fx = prox_objective(x.matrix(), &a, &layout, l1, group, &w);
        let fo = prox_objective(&oracle, &a, &layout, l1, group, &w);
        assert!(fx - fo <= 1e-6, "prox objective {fx} above oracle {fo}");
        assert!((x.matrix() - &oracle).norm() < 1e-5);
        let sa = SymBlockMatrix::new(layout, a).unwrap();
        assert!(kkt_residual(&x, &sa, l1, group, &w).unwrap() <= 1e-8);
    }
}

#[test]
fn large_thresholds_give_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let layout = BlockLayout::new(vec![2, 3]).unwrap();
    let a = random_symmetric(5, 1.0, &mut rng);
    let w = WeightMatrix::size_balanced(&layout);
    let sa = SymBlockMatrix::new(layout, a.clone()).unwrap();
    assert!(hierarchical_prox(&sa, a.amax(), 0.0, &w).unwrap().is_zero());
}

#[test]
fn unpenalized_fit_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..5 {
        let p = rng.random_range(4..=12);
        let mut spectrum: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..1.0)).collect();
        spectrum[0] = 3.0;
        let layout = random_layout(p, 2, &mut rng);
        let s = with_spectrum(&spectrum, &mut rng);
        let sm = SymBlockMatrix::symmetrized(layout.clone(), s.clone()).unwrap();
        let pen = PenaltyConfig::with_default_weights(0.0, 0.0, &layout).unwrap();
        let fit = fit_sequential(&sm, 1, &[pen], &AdmmConfig::default()).unwrap();
        let v = power_iteration(&s, 100_000);
        assert!(line_angle(&fit.levels[0].v, &v) < 1e-6);
    }
}

fn objective_of(s: &SymBlockMatrix, pen: &PenaltyConfig, cfg: &AdmmConfig) -> f64 {
    let lvl = solve_level(s, &Projector::empty(s.layout()), pen, cfg).unwrap();
    pen.objective(s, &lvl.h).unwrap()
}

#[test]
fn staged_solver_matches_long_horizon_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..3 {
        let layout = BlockLayout::new(vec![3, 5]).unwrap();
        let x = DMatrix::from_fn(30, 8, |_, _| rng.random_range(-1.0..1.0));
        let s = SymBlockMatrix::symmetrized(layout.clone(), x.transpose() * &x / 30.0).unwrap();
        let pen = PenaltyConfig::with_default_weights(0.05, 0.5, &layout).unwrap();
        let fast = objective_of(&s, &pen, &AdmmConfig::default());
        let slow_cfg = AdmmConfig { solver: SolverKind::Admm, tol: 1e-12, max_total_iters: 200_000, ..Default::default() };
        let slow = objective_of(&s, &pen, &slow_cfg);
        assert!((fast - slow).abs() <= 1e-6 * slow.abs().max(1.0), "{fast} vs {slow}");
    }
}

// A finite sparse iterate once made the general symmetric eigensolver
// return NaN; the fit must go through.
#[test]
fn weak_heteroskedastic_fit_regression() {
    let setup = SimulationSetup { views: 8, block_size: 20, n: 400, alpha: 15.0, seed: 0, ..Default::default() };
    let sim = setup.generate().unwrap();
    let layout = setup.layout().unwrap();
    let s = denoise(&sim.data, &layout, &NoiseSource::default()).unwrap().s;
    let rule = PenaltyRule { fraction: 0.25, beta: 1.0, reference: LambdaReference::Full };
    let fit = fit_with_rule(&s, 3, &rule, &AdmmConfig::default()).unwrap();
    assert!(fit.max_cross_inner_product() < 1e-6);
    assert!(fit.levels.iter().all(|l| l.v.iter().all(|x| x.is_finite())));
    assert_eq!(fit.penalties[0].lambda, 0.25 * lambda_max(&s, &Projector::empty(&layout)));
    let _: DVector<f64> = fit.levels[2].v.clone();
}

