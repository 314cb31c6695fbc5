//! ADMM for the penalized deflated-Fantope program
//!
//! ```text
//! max_{H in F_Pi}  <S, H> - lambda*beta*||H||_{1,1} - lambda*(1-beta)*||H||*_{1,1}
//! ```
//!
//! split as `H1 = H2` with `H1` carrying the deflated-Fantope constraint and
//! `H2` the two penalties, plus the sequential driver that estimates one
//! eigenvector per level and deflates by the ones already found.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blockmat::{symmetrize_in_place, BlockLayout, SymBlockMatrix, WeightMatrix};
use crate::error::{Result, SipcaError};
use crate::fantope::{deflated_fantope_project, leading_eigvec, Projector};
use crate::linalg::{fix_sign, orthonormal_span, sym_eigen, sym_eigenvalues};
use crate::prox::hierarchical_prox;

/// Entries of the returned `H` below this magnitude are set to exactly zero.
pub const ZERO_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub beta: f64,
    pub weights: WeightMatrix,
}

impl PenaltyConfig {
    pub fn new(lambda: f64, beta: f64, weights: WeightMatrix) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(SipcaError::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(SipcaError::InvalidParameter(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(PenaltyConfig { lambda, beta, weights })
    }

    /// Size-balanced weights `sqrt(p_k p_l)`.
    pub fn with_default_weights(lambda: f64, beta: f64, layout: &BlockLayout) -> Result<Self> {
        Self::new(lambda, beta, WeightMatrix::size_balanced(layout))
    }

    pub fn l1_level(&self) -> f64 {
        self.lambda * self.beta
    }

    pub fn group_level(&self) -> f64 {
        self.lambda * (1.0 - self.beta)
    }

    pub fn penalty(&self, h: &SymBlockMatrix) -> Result<f64> {
        Ok(self.l1_level() * h.norm_l11() + self.group_level() * h.norm_group(&self.weights)?)
    }

    /// `<S, H> - penalty(H)`, the maximized objective.
    pub fn objective(&self, s: &SymBlockMatrix, h: &SymBlockMatrix) -> Result<f64> {
        Ok(s.dot(h) - self.penalty(h)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Penalty parameter grows by `alpha0` after every stage.
    #[default]
    LaAdmm,
    /// Fixed penalty parameter `rho0`.
    Admm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    pub solver: SolverKind,
    /// Initial penalty parameter; multiplied by `||S||_2` when
    /// `rho_relative` is set, which makes the iterates invariant to the
    /// scale of the data.
    pub rho0: f64,
    pub rho_relative: bool,
    pub alpha0: f64,
    pub iters_per_stage: usize,
    pub max_stages: usize,
    /// Stopping tolerance on the Frobenius residuals `||H1 - H2||` and the
    /// change in `H2`. Both iterates live on the trace-one Fantope scale, so
    /// this is absolute.
    pub tol: f64,
    pub max_total_iters: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            solver: SolverKind::LaAdmm,
            rho0: 1.0,
            rho_relative: true,
            alpha0: 2.0,
            iters_per_stage: 50,
            max_stages: 100,
            tol: 1e-7,
            max_total_iters: 5000,
        }
    }
}

impl AdmmConfig {
    /// The starting `rho` for covariance `s`.
    pub fn initial_rho(&self, s: &SymBlockMatrix) -> f64 {
        if !self.rho_relative {
            return self.rho0;
        }
        let ev = sym_eigenvalues(s.matrix());
        let norm = ev.first().map_or(0.0, |a| a.abs()).max(ev.last().map_or(0.0, |b| b.abs()));
        if norm > 0.0 && norm.is_finite() {
            self.rho0 * norm
        } else {
            self.rho0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(SipcaError::InvalidParameter(format!("rho0 must be positive, got {}", self.rho0)));
        }
        if !(self.alpha0 > 1.0 && self.alpha0.is_finite()) {
            return Err(SipcaError::InvalidParameter(format!("alpha0 must exceed 1, got {}", self.alpha0)));
        }
        if !(self.tol > 0.0) {
            return Err(SipcaError::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.iters_per_stage == 0 || self.max_stages == 0 || self.max_total_iters == 0 {
            return Err(SipcaError::InvalidParameter("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Solution of one level of the sequential program.
#[derive(Debug, Clone)]
pub struct LevelFit {
    /// `H2` at exit, floored so that small entries are exact zeros.
    pub h: SymBlockMatrix,
    /// The constrained copy `H1` at exit.
    pub h_projected: SymBlockMatrix,
    pub v: DVector<f64>,
    pub iterations: usize,
    pub stages: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub converged: bool,
    pub final_rho: f64,
}

struct AdmmState {
    h1: SymBlockMatrix,
    h2: SymBlockMatrix,
    w: SymBlockMatrix,
}

struct RunOutcome {
    iterations: usize,
    primal: f64,
    dual: f64,
    stopped: bool,
}

/// Runs up to `max_iters` ADMM iterations at fixed `rho`. When `stop_tol` is
/// given, stops as soon as `max(||H1 - H2||, ||H2 - H2_prev||) <= stop_tol`.
fn run_iterations(
    state: &mut AdmmState,
    s: &SymBlockMatrix,
    pi: &Projector,
    pen: &PenaltyConfig,
    rho: f64,
    max_iters: usize,
    stop_tol: Option<f64>,
) -> Result<RunOutcome> {
    let (l1, group) = (pen.l1_level() / rho, pen.group_level() / rho);
    let mut out = RunOutcome { iterations: 0, primal: f64::INFINITY, dual: f64::INFINITY, stopped: false };
    for _ in 0..max_iters {
        // H1 <- P_{F_Pi}(H2 - (W - S)/rho)
        let target = state.h2.axpy(-1.0 / rho, &state.w.sub(s));
        state.h1 = deflated_fantope_project(&target, pi)?;
        // H2 <- Prox(W/rho + H1)
        let h2_prev = std::mem::replace(
            &mut state.h2,
            hierarchical_prox(&state.h1.axpy(1.0 / rho, &state.w), l1, group, &pen.weights)?,
        );
        let gap = state.h1.sub(&state.h2);
        state.w = state.w.axpy(rho, &gap);

        out.iterations += 1;
        out.primal = gap.frobenius();
        out.dual = state.h2.sub(&h2_prev).frobenius();
        if !out.primal.is_finite() || !out.dual.is_finite() || state.w.has_non_finite() {
            return Err(SipcaError::Numerical(format!("non-finite ADMM iterate after {} iterations", out.iterations)));
        }
        if let Some(tol) = stop_tol {
            if out.primal.max(out.dual) <= tol {
                out.stopped = true;
                break;
            }
        }
    }
    Ok(out)
}

fn check_inputs(s: &SymBlockMatrix, pi: &Projector, pen: &PenaltyConfig, cfg: &AdmmConfig, h2_init: &SymBlockMatrix) -> Result<()> {
    cfg.validate()?;
    s.layout().ensure_same(pi.layout())?;
    s.layout().ensure_same(pen.weights.layout())?;
    s.layout().ensure_same(h2_init.layout())?;
    if s.has_non_finite() {
        return Err(SipcaError::Numerical("covariance contains non-finite entries".into()));
    }
    Ok(())
}

/// Plain ADMM with fixed `rho0`, warm-started at `h2_init` with zero dual.
pub fn admm_solve(
    s: &SymBlockMatrix,
    pi: &Projector,
    pen: &PenaltyConfig,
    cfg: &AdmmConfig,
    h2_init: &SymBlockMatrix,
) -> Result<LevelFit> {
    check_inputs(s, pi, pen, cfg, h2_init)?;
    let mut state = AdmmState { h1: h2_init.clone(), h2: h2_init.clone(), w: SymBlockMatrix::zeros(s.layout()) };
    let rho = cfg.initial_rho(s);
    let run = run_iterations(&mut state, s, pi, pen, rho, cfg.max_total_iters, Some(cfg.tol))?;
    finish(state, s, pi, pen, run.iterations, 1, run.primal, run.dual, run.stopped, rho)
}

/// Locally adaptive ADMM: stages of `iters_per_stage` iterations, `rho`
/// multiplied by `alpha0` between stages, each stage warm-started from the
/// previous `H2` and dual. Converged when both `||H1 - H2||` and the change in
/// `H2` over the last stage are at most `tol`.
pub fn la_admm_solve(
    s: &SymBlockMatrix,
    pi: &Projector,
    pen: &PenaltyConfig,
    cfg: &AdmmConfig,
    h2_init: &SymBlockMatrix,
) -> Result<LevelFit> {
    check_inputs(s, pi, pen, cfg, h2_init)?;
    let mut state = AdmmState { h1: h2_init.clone(), h2: h2_init.clone(), w: SymBlockMatrix::zeros(s.layout()) };
    let mut rho = cfg.initial_rho(s);
    let mut total = 0;
    let mut stages = 0;
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    while stages < cfg.max_stages && total < cfg.max_total_iters {
        let stage_start = state.h2.clone();
        let budget = cfg.iters_per_stage.min(cfg.max_total_iters - total);
        let run = run_iterations(&mut state, s, pi, pen, rho, budget, None)?;
        total += run.iterations;
        stages += 1;
        primal = run.primal;
        dual = state.h2.sub(&stage_start).frobenius();
        if primal.max(dual) <= cfg.tol {
            converged = true;
            break;
        }
        rho *= cfg.alpha0;
    }
    let final_rho = if converged { rho } else { rho / cfg.alpha0 };
    finish(state, s, pi, pen, total, stages, primal, dual, converged, final_rho)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    state: AdmmState,
    s: &SymBlockMatrix,
    pi: &Projector,
    pen: &PenaltyConfig,
    iterations: usize,
    stages: usize,
    primal: f64,
    dual: f64,
    converged: bool,
    final_rho: f64,
) -> Result<LevelFit> {
    let h = state.h2.floor_small(ZERO_FLOOR);
    let v = if h.is_zero() {
        deflated_leading_vector(&state.h1, pi, false)?
    } else {
        deflated_leading_vector(&h, pi, true)?
    };
    let objective = pen.objective(s, &h)?;
    Ok(LevelFit {
        h,
        h_projected: state.h1,
        v,
        iterations,
        stages,
        primal_residual: primal,
        dual_residual: dual,
        objective,
        converged,
        final_rho,
    })
}

/// Leading eigenvector of `h`, computed inside the subspace of vectors that
/// vanish off the nonzero rows of `h` (when `support_only`) and are
/// orthogonal to the range of `pi`. Exact zeros of `h` stay exact zeros and
/// orthogonality to earlier eigenvectors holds to rounding, regardless of
/// how tightly the splitting converged. With a rank-0 projector this is the
/// plain leading eigenvector.
pub fn deflated_leading_vector(h: &SymBlockMatrix, pi: &Projector, support_only: bool) -> Result<DVector<f64>> {
    if pi.rank() == 0 {
        return Ok(leading_eigvec(h));
    }
    let p = h.dim();
    let support: Vec<usize> = if support_only {
        (0..p).filter(|&i| h.matrix().row(i).iter().any(|x| *x != 0.0)).collect()
    } else {
        (0..p).collect()
    };
    let sub_basis = DMatrix::from_fn(support.len(), pi.rank(), |a, c| pi.basis()[(support[a], c)]);
    let taken = orthonormal_span(&sub_basis, 1e-12);
    if taken.ncols() >= support.len() {
        if support_only {
            return deflated_leading_vector(h, pi, false);
        }
        return Err(SipcaError::Numerical("no direction left after deflation".into()));
    }
    // orthonormal basis of the part of R^support orthogonal to `taken`
    let m = support.len();
    let mut keep = DMatrix::<f64>::identity(m, m) - &taken * taken.transpose();
    symmetrize_in_place(&mut keep);
    let eig = sym_eigen(&keep);
    let free = eig.values.iter().take_while(|&&g| g > 0.5).count();
    let basis = eig.vectors.columns(0, free).into_owned();

    let h_sub = DMatrix::from_fn(m, m, |a, b| h.get(support[a], support[b]));
    let mut reduced = basis.transpose() * h_sub * &basis;
    symmetrize_in_place(&mut reduced);
    let top = sym_eigen(&reduced);
    let local = &basis * top.vectors.column(0);
    let mut v = DVector::zeros(p);
    for (a, &i) in support.iter().enumerate() {
        v[i] = local[a];
    }
    v.normalize_mut();
    fix_sign(&mut v);
    Ok(v)
}

/// Element and block supports of a vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Supports {
    /// Coordinates with `|v_i| > zero_tol` (0-based).
    pub elements: Vec<usize>,
    /// Views with `||v^k|| > zero_tol` (0-based).
    pub blocks: Vec<usize>,
}

pub fn extract_supports(v: &DVector<f64>, layout: &BlockLayout, zero_tol: f64) -> Result<Supports> {
    if v.len() != layout.dim() {
        return Err(SipcaError::Dimension(format!("vector has length {}, layout {}", v.len(), layout.dim())));
    }
    if !(zero_tol >= 0.0) {
        return Err(SipcaError::InvalidParameter("zero tolerance must be nonnegative".into()));
    }
    let elements = (0..v.len()).filter(|&i| v[i].abs() > zero_tol).collect();
    let blocks = (0..layout.num_views())
        .filter(|&k| {
            let r = layout.range(k);
            v.rows(r.start, r.len()).norm() > zero_tol
        })
        .collect();
    Ok(Supports { elements, blocks })
}

/// Default support threshold for solver outputs.
pub const SUPPORT_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SipcaFit {
    pub levels: Vec<LevelFit>,
    pub projector: Projector,
    pub penalties: Vec<PenaltyConfig>,
    pub supports: Vec<Supports>,
}

impl SipcaFit {
    pub fn rank(&self) -> usize {
        self.levels.len()
    }

    /// `p x r` matrix of estimated eigenvectors.
    pub fn eigenvectors(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.levels.iter().map(|l| l.v.clone()).collect();
        DMatrix::from_columns(&cols)
    }

    /// `max_{i != j} |v_i^T v_j|`.
    pub fn max_cross_inner_product(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.levels.len() {
            for j in (i + 1)..self.levels.len() {
                worst = worst.max(self.levels[i].v.dot(&self.levels[j].v).abs());
            }
        }
        worst
    }
}

/// Solves one level with the configured solver, warm-started at the
/// unpenalized deflated projection of `s`.
pub fn solve_level(s: &SymBlockMatrix, pi: &Projector, pen: &PenaltyConfig, cfg: &AdmmConfig) -> Result<LevelFit> {
    let init = deflated_fantope_project(s, pi)?;
    match cfg.solver {
        SolverKind::LaAdmm => la_admm_solve(s, pi, pen, cfg, &init),
        SolverKind::Admm => admm_solve(s, pi, pen, cfg, &init),
    }
}

/// Estimates `r` eigenvectors one after another, deflating by the span of
/// those already found. `pens` holds one penalty per level, or a single
/// penalty used for every level.
pub fn fit_sequential(s: &SymBlockMatrix, r: usize, pens: &[PenaltyConfig], cfg: &AdmmConfig) -> Result<SipcaFit> {
    fit_sequential_from(s, r, pens, cfg, &Projector::empty(s.layout()))
}

/// As [`fit_sequential`], starting from an existing projector.
pub fn fit_sequential_from(
    s: &SymBlockMatrix,
    r: usize,
    pens: &[PenaltyConfig],
    cfg: &AdmmConfig,
    start: &Projector,
) -> Result<SipcaFit> {
    if pens.len() != 1 && pens.len() != r {
        return Err(SipcaError::InvalidParameter(format!("{} penalty configs for rank {r}", pens.len())));
    }
    fit_sequential_with(s, r, cfg, start, |j, _| Ok(if pens.len() == 1 { pens[0].clone() } else { pens[j].clone() }))
}

/// Sequential fit where the penalty of level `j` (0-based) is chosen by
/// `penalty_for(j, current_projector)`.
pub fn fit_sequential_with<F>(
    s: &SymBlockMatrix,
    r: usize,
    cfg: &AdmmConfig,
    start: &Projector,
    mut penalty_for: F,
) -> Result<SipcaFit>
where
    F: FnMut(usize, &Projector) -> Result<PenaltyConfig>,
{
    if r == 0 {
        return Err(SipcaError::InvalidParameter("rank must be at least 1".into()));
    }
    let mut pi = start.clone();
    let mut levels = Vec::with_capacity(r);
    let mut used = Vec::with_capacity(r);
    let mut supports = Vec::with_capacity(r);
    for j in 0..r {
        let step = penalty_for(j, &pi).and_then(|pen| {
            let lvl = solve_level(s, &pi, &pen, cfg)?;
            let next = pi.extend(&lvl.v)?;
            Ok((pen, lvl, next))
        });
        let (pen, lvl, next) = step.map_err(|e| SipcaError::LevelFailed {
            level: j + 1,
            source: Box::new(e),
            completed: levels.iter().map(|l: &LevelFit| l.v.iter().copied().collect()).collect(),
        })?;
        supports.push(extract_supports(&lvl.v, s.layout(), SUPPORT_ZERO_TOL)?);
        levels.push(lvl);
        used.push(pen);
        pi = next;
    }
    Ok(SipcaFit { levels, projector: pi, penalties: used, supports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cov(layout: &BlockLayout, seed: u64) -> SymBlockMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = layout.dim();
        let a = DMatrix::from_fn(p, p + 3, |_, _| rng.random_range(-1.0..1.0));
        SymBlockMatrix::symmetrized(layout.clone(), &a * a.transpose()).unwrap()
    }

    #[test]
    fn penalty_config_validation() {
        let l = BlockLayout::uniform(2, 2).unwrap();
        assert!(PenaltyConfig::with_default_weights(-1.0, 0.5, &l).is_err());
        assert!(PenaltyConfig::with_default_weights(1.0, 1.5, &l).is_err());
        let p = PenaltyConfig::with_default_weights(2.0, 0.25, &l).unwrap();
        assert_eq!(p.l1_level(), 0.5);
        assert_eq!(p.group_level(), 1.5);
        assert!(AdmmConfig { alpha0: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdmmConfig { tol: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn supports_of_simple_vectors() {
        let l = BlockLayout::uniform(2, 2).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let s = extract_supports(&e1, &l, 0.0).unwrap();
        assert_eq!(s.elements, vec![0]);
        assert_eq!(s.blocks, vec![0]);
        let v = DVector::from_vec(vec![0.0, 0.0, 0.6, -0.8]);
        let s = extract_supports(&v, &l, 1e-8).unwrap();
        assert_eq!(s.elements, vec![2, 3]);
        assert_eq!(s.blocks, vec![1]);
    }

    #[test]
    fn unpenalized_fit_recovers_top_eigenvector() {
        let l = BlockLayout::uniform(2, 3).unwrap();
        let s = random_cov(&l, 1);
        let pen = PenaltyConfig::with_default_weights(0.0, 0.5, &l).unwrap();
        let fit = solve_level(&s, &Projector::empty(&l), &pen, &AdmmConfig::default()).unwrap();
        let top = leading_eigvec(&s);
        assert!(fit.v.dot(&top).abs() > 1.0 - 1e-12);
    }

    #[test]
    fn plain_admm_and_la_admm_agree() {
        let l = BlockLayout::uniform(2, 4).unwrap();
        let s = random_cov(&l, 2);
        let pen = PenaltyConfig::with_default_weights(0.05, 0.5, &l).unwrap();
        let pi = Projector::empty(&l);
        let init = deflated_fantope_project(&s, &pi).unwrap();
        let cfg = AdmmConfig { max_total_iters: 20_000, ..Default::default() };
        let a = admm_solve(&s, &pi, &pen, &cfg, &init).unwrap();
        let b = la_admm_solve(&s, &pi, &pen, &cfg, &init).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.h.sub(&b.h).frobenius() < 1e-4);
    }

    #[test]
    fn degenerate_growth_is_plain_admm() {
        let l = BlockLayout::uniform(2, 3).unwrap();
        let s = random_cov(&l, 3);
        let pen = PenaltyConfig::with_default_weights(0.1, 0.5, &l).unwrap();
        let pi = Projector::empty(&l);
        let init = deflated_fantope_project(&s, &pi).unwrap();
        let cfg = AdmmConfig { alpha0: 1.0 + 1e-12, iters_per_stage: 300, max_stages: 1, max_total_iters: 300, tol: 1e-300, ..Default::default() };
        let la = la_admm_solve(&s, &pi, &pen, &cfg, &init).unwrap();
        let plain = admm_solve(&s, &pi, &pen, &AdmmConfig { max_total_iters: 300, tol: 1e-300, ..cfg }, &init).unwrap();
        assert_eq!(la.iterations, plain.iterations);
        assert_eq!(la.h, plain.h);
    }

    #[test]
    fn sequential_levels_are_orthogonal_and_feasible() {
        let l = BlockLayout::uniform(3, 4).unwrap();
        let s = random_cov(&l, 4);
        let pen = PenaltyConfig::with_default_weights(0.1, 0.5, &l).unwrap();
        let fit = fit_sequential(&s, 3, &[pen], &AdmmConfig::default()).unwrap();
        assert_eq!(fit.rank(), 3);
        assert_eq!(fit.projector.rank(), 3);
        assert!(fit.max_cross_inner_product() <= 1e-6);
        let mut pi = Projector::empty(&l);
        for lvl in &fit.levels {
            assert!((lvl.v.norm() - 1.0).abs() < 1e-10);
            assert!((lvl.h.trace() - 1.0).abs() < 1e-6);
            let ev = sym_eigenvalues(lvl.h.matrix());
            assert!(ev[0] <= 1.0 + 1e-6 && *ev.last().unwrap() >= -1e-6);
            assert!(lvl.h.dot(pi.matrix()).abs() <= 1e-6);
            pi = pi.extend(&lvl.v).unwrap();
        }
    }

    #[test]
    fn rank_one_and_bad_penalty_lists() {
        let l = BlockLayout::uniform(2, 2).unwrap();
        let s = random_cov(&l, 5);
        let pen = PenaltyConfig::with_default_weights(0.1, 0.5, &l).unwrap();
        let fit = fit_sequential(&s, 1, std::slice::from_ref(&pen), &AdmmConfig::default()).unwrap();
        assert_eq!(fit.projector.rank(), 1);
        assert!(fit_sequential(&s, 0, std::slice::from_ref(&pen), &AdmmConfig::default()).is_err());
        assert!(fit_sequential(&s, 3, &[pen.clone(), pen], &AdmmConfig::default()).is_err());
    }

    #[test]
    fn solver_is_deterministic() {
        let l = BlockLayout::uniform(2, 3).unwrap();
        let s = random_cov(&l, 6);
        let pen = PenaltyConfig::with_default_weights(0.2, 0.25, &l).unwrap();
        let a = fit_sequential(&s, 2, std::slice::from_ref(&pen), &AdmmConfig::default()).unwrap();
        let b = fit_sequential(&s, 2, &[pen], &AdmmConfig::default()).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert_eq!(x.h, y.h);
            assert_eq!(x.v, y.v);
        }
    }

    #[test]
    fn nan_input_is_reported() {
        let l = BlockLayout::single(2).unwrap();
        let s = SymBlockMatrix::symmetrized(l.clone(), DMatrix::from_element(2, 2, f64::NAN)).unwrap();
        let pen = PenaltyConfig::with_default_weights(0.1, 0.5, &l).unwrap();
        assert!(solve_level(&s, &Projector::empty(&l), &pen, &AdmmConfig::default()).is_err());
    }
}
