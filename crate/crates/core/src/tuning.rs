//! K-fold cross-validation of `(lambda, beta)` for one level at a time.
//!
//! Each training split is denoised on its own; the held-out fold is scored
//! with its raw sample covariance, `sum_v e_v^T S^v e_v`. Deflation inside
//! the folds uses the projector of the full-data fit of earlier levels.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmat::{BlockLayout, SymBlockMatrix};
use crate::denoise::{denoise, sample_covariance, NoiseSource};
use crate::error::{Result, SipcaError};
use crate::fantope::Projector;
use crate::solver::{fit_sequential_with, solve_level, AdmmConfig, PenaltyConfig, SipcaFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneGrid {
    pub betas: Vec<f64>,
    pub n_lambdas: usize,
    pub folds: usize,
    pub seed: u64,
    /// Adds `lambda = 0` to the grid.
    pub include_zero: bool,
}

impl Default for TuneGrid {
    fn default() -> Self {
        TuneGrid { betas: vec![0.0, 0.25, 0.5, 0.75, 1.0], n_lambdas: 10, folds: 5, seed: 0, include_zero: false }
    }
}

impl TuneGrid {
    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(SipcaError::InvalidParameter(format!("betas must be a nonempty subset of [0, 1], got {:?}", self.betas)));
        }
        if self.n_lambdas == 0 {
            return Err(SipcaError::InvalidParameter("n_lambdas must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(SipcaError::InvalidParameter(format!("need at least 2 folds, got {}", self.folds)));
        }
        Ok(())
    }
}

/// Nearest-rank 95th percentile of the off-diagonal magnitudes of the
/// deflated `S`.
pub fn lambda_max(s: &SymBlockMatrix, pi: &Projector) -> f64 {
    let sj = pi.deflate(s);
    let p = sj.dim();
    let mut off = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for j in 0..p {
        for i in (j + 1)..p {
            off.push(sj.get(i, j).abs());
        }
    }
    nearest_rank(&mut off, 0.95)
}

fn nearest_rank(values: &mut [f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

/// `n` values log-spaced on `[lambda_max / 1000, lambda_max]`, ascending.
/// Degenerates to `[0]` when the deflated off-diagonal is zero.
pub fn lambda_grid(s: &SymBlockMatrix, pi: &Projector, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(SipcaError::InvalidParameter(format!("lambda grid needs at least 2 points, got {n}")));
    }
    let top = lambda_max(s, pi);
    if !(top > 0.0) {
        return Ok(vec![0.0]);
    }
    let (lo, hi) = ((top / 1000.0).ln(), top.ln());
    let mut grid: Vec<f64> = (0..n).map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()).collect();
    // keep the endpoint exact so the rule "lambda = lambda_max" is on the grid
    grid[n - 1] = top;
    Ok(grid)
}

/// Seeded shuffle of `0..n` cut into `folds` near-equal parts, each sorted.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(SipcaError::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if n < 2 * folds {
        return Err(SipcaError::TooFewSamples { needed: 2 * folds, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(folds);
    let (base, extra) = (n / folds, n % folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        let mut f = idx[start..start + len].to_vec();
        f.sort_unstable();
        out.push(f);
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub lambda: f64,
    pub beta: f64,
    pub fold_scores: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    pub beta: f64,
    pub score: f64,
    pub table: Vec<ScoreRow>,
}

struct Fold {
    train_s: SymBlockMatrix,
    test_cov: SymBlockMatrix,
}

fn prepare_folds(x: &DMatrix<f64>, layout: &BlockLayout, grid: &TuneGrid, noise: &NoiseSource) -> Result<Vec<Fold>> {
    let folds = fold_assignment(x.nrows(), grid.folds, grid.seed)?;
    folds
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; x.nrows()];
            test.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<usize> = (0..x.nrows()).filter(|&i| !in_test[i]).collect();
            let train_s = denoise(&x.select_rows(train.iter()), layout, noise)?.s;
            let test_cov = sample_covariance(&x.select_rows(test.iter()), layout)?;
            Ok(Fold { train_s, test_cov })
        })
        .collect()
}

fn is_better(row: &ScoreRow, best: &ScoreRow) -> bool {
    // ties go to the sparser model
    row.total > best.total
        || (row.total == best.total && (row.lambda > best.lambda || (row.lambda == best.lambda && row.beta > best.beta)))
}

fn select(table: Vec<ScoreRow>) -> CvResult {
    let best = table.iter().fold(&table[0], |b, r| if is_better(r, b) { r } else { b });
    CvResult { lambda: best.lambda, beta: best.beta, score: best.total, table: table.clone() }
}

fn score_grid(folds: &[Fold], pi: &Projector, lambdas: &[f64], grid: &TuneGrid, cfg: &AdmmConfig) -> Result<Vec<ScoreRow>> {
    let layout = pi.layout();
    let pairs: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| grid.betas.iter().map(move |&b| (l, b))).collect();
    let tasks: Vec<(usize, usize)> = (0..pairs.len()).flat_map(|g| (0..folds.len()).map(move |f| (g, f))).collect();
    let scores: Vec<f64> = tasks
        .par_iter()
        .map(|&(g, f)| {
            let (lambda, beta) = pairs[g];
            let pen = PenaltyConfig::with_default_weights(lambda, beta, layout)?;
            let lvl = solve_level(&folds[f].train_s, pi, &pen, cfg)?;
            let e = &lvl.v;
            let score = e.dot(&(folds[f].test_cov.matrix() * e));
            if !score.is_finite() {
                return Err(SipcaError::Numerical(format!("non-finite CV score at lambda {lambda}, beta {beta}")));
            }
            Ok(score)
        })
        .collect::<Result<_>>()?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(g, &(lambda, beta))| {
            let fold_scores = scores[g * folds.len()..(g + 1) * folds.len()].to_vec();
            let total = fold_scores.iter().sum();
            ScoreRow { lambda, beta, fold_scores, total }
        })
        .collect())
}

fn check_inputs(x: &DMatrix<f64>, layout: &BlockLayout, pi: &Projector, grid: &TuneGrid) -> Result<()> {
    grid.validate()?;
    if pi.layout() != layout {
        return Err(SipcaError::LayoutMismatch { expected: layout.sizes().to_vec(), found: pi.layout().sizes().to_vec() });
    }
    if x.ncols() != layout.dim() {
        return Err(SipcaError::Dimension(format!("data has {} columns, layout has {}", x.ncols(), layout.dim())));
    }
    Ok(())
}

fn candidate_lambdas(s: &SymBlockMatrix, pi: &Projector, grid: &TuneGrid) -> Result<Vec<f64>> {
    let mut lambdas = if grid.n_lambdas == 1 { vec![lambda_max(s, pi)] } else { lambda_grid(s, pi, grid.n_lambdas)? };
    if grid.include_zero && lambdas[0] != 0.0 {
        lambdas.insert(0, 0.0);
    }
    Ok(lambdas)
}

/// Cross-validates one level, deflated by `pi`. The lambda grid is built
/// from the full-data denoised covariance.
pub fn cross_validate(
    x: &DMatrix<f64>,
    layout: &BlockLayout,
    pi: &Projector,
    grid: &TuneGrid,
    cfg: &AdmmConfig,
    noise: &NoiseSource,
) -> Result<CvResult> {
    check_inputs(x, layout, pi, grid)?;
    let s = denoise(x, layout, noise)?.s;
    let lambdas = candidate_lambdas(&s, pi, grid)?;
    let folds = prepare_folds(x, layout, grid, noise)?;
    Ok(select(score_grid(&folds, pi, &lambdas, grid, cfg)?))
}

/// Tunes and fits `r` levels in turn: each level's CV uses the projector
/// of the full-data fits of the levels before it.
pub fn tune_sequential(
    x: &DMatrix<f64>,
    layout: &BlockLayout,
    r: usize,
    grid: &TuneGrid,
    cfg: &AdmmConfig,
    noise: &NoiseSource,
) -> Result<(SipcaFit, Vec<CvResult>)> {
    let start = Projector::empty(layout);
    check_inputs(x, layout, &start, grid)?;
    let s = denoise(x, layout, noise)?.s;
    let folds = prepare_folds(x, layout, grid, noise)?;
    let mut results = Vec::with_capacity(r);
    let fit = fit_sequential_with(&s, r, cfg, &start, |_, pi| {
        let lambdas = candidate_lambdas(&s, pi, grid)?;
        let cv = select(score_grid(&folds, pi, &lambdas, grid, cfg)?);
        let pen = PenaltyConfig::with_default_weights(cv.lambda, cv.beta, layout)?;
        results.push(cv);
        Ok(pen)
    })?;
    Ok((fit, results))
}

/// Which covariance `lambda_max` is read from in a [`PenaltyRule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaReference {
    /// The undeflated `S`, one value for every level.
    #[default]
    Full,
    /// `S` deflated by the levels found so far.
    Deflated,
}

/// Fixed-rule penalty without cross-validation:
/// `lambda = fraction * lambda_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRule {
    pub fraction: f64,
    pub beta: f64,
    #[serde(default)]
    pub reference: LambdaReference,
}

impl PenaltyRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction >= 0.0 && self.fraction.is_finite()) {
            return Err(SipcaError::InvalidParameter(format!("lambda fraction must be nonnegative, got {}", self.fraction)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(SipcaError::InvalidParameter(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    pub fn penalty(&self, s: &SymBlockMatrix, pi: &Projector) -> Result<PenaltyConfig> {
        self.validate()?;
        let top = match self.reference {
            LambdaReference::Full => lambda_max(s, &Projector::empty(s.layout())),
            LambdaReference::Deflated => lambda_max(s, pi),
        };
        PenaltyConfig::with_default_weights(self.fraction * top, self.beta, s.layout())
    }
}

/// Sequential fit with penalties from `rule`.
pub fn fit_with_rule(s: &SymBlockMatrix, r: usize, rule: &PenaltyRule, cfg: &AdmmConfig) -> Result<SipcaFit> {
    rule.validate()?;
    fit_sequential_with(s, r, cfg, &Projector::empty(s.layout()), |_, pi| rule.penalty(s, pi))
}
