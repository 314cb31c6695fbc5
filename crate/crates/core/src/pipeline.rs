//! Data matrix to fitted eigenvectors: denoise, choose penalties, fit, and
//! the serializable report written by the `fit` command.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blockmat::BlockLayout;
use crate::denoise::{denoise, NoiseSource};
use crate::error::{Result, SipcaError};
use crate::io::SCHEMA_VERSION;
use crate::solver::{fit_sequential, AdmmConfig, PenaltyConfig, SipcaFit, Supports};
use crate::tuning::{fit_with_rule, tune_sequential, CvResult, PenaltyRule, TuneGrid};

/// How the per-level `(lambda, beta)` are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PenaltyChoice {
    Fixed { lambda: f64, beta: f64 },
    Rule(PenaltyRule),
    Tuned(TuneGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub rank: usize,
    pub penalty: PenaltyChoice,
    pub noise: NoiseSource,
    #[serde(default)]
    pub admm: AdmmConfig,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub fit: SipcaFit,
    pub sigma2_hat: Vec<f64>,
    pub tuning: Option<Vec<CvResult>>,
}

pub fn run_fit(x: &DMatrix<f64>, layout: &BlockLayout, cfg: &FitConfig) -> Result<FitOutcome> {
    cfg.admm.validate()?;
    if cfg.rank == 0 || cfg.rank > layout.dim() {
        return Err(SipcaError::InvalidParameter(format!("rank {} outside 1..={}", cfg.rank, layout.dim())));
    }
    let d = denoise(x, layout, &cfg.noise)?;
    let (fit, tuning) = match &cfg.penalty {
        PenaltyChoice::Fixed { lambda, beta } => {
            let pen = PenaltyConfig::with_default_weights(*lambda, *beta, layout)?;
            (fit_sequential(&d.s, cfg.rank, &[pen], &cfg.admm)?, None)
        }
        PenaltyChoice::Rule(rule) => (fit_with_rule(&d.s, cfg.rank, rule, &cfg.admm)?, None),
        PenaltyChoice::Tuned(grid) => {
            let (fit, cv) = tune_sequential(x, layout, cfg.rank, grid, &cfg.admm, &cfg.noise)?;
            (fit, Some(cv))
        }
    };
    Ok(FitOutcome { fit, sigma2_hat: d.sigma2_hat, tuning })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub lambda: f64,
    pub beta: f64,
    pub eigenvector: Vec<f64>,
    pub supports: Supports,
    pub iterations: usize,
    pub stages: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub final_rho: f64,
    pub trace: f64,
    /// `<H_j, Pi_{j-1}>` of the returned iterate.
    pub deflation_overlap: f64,
}

/// Everything the `fit` command writes: the resolved config, the inputs'
/// shape, the noise estimates and one entry per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub config: FitConfig,
    pub layout: BlockLayout,
    pub n: usize,
    pub sigma2_hat: Vec<f64>,
    pub levels: Vec<LevelReport>,
    pub max_cross_inner_product: f64,
}

impl FitReport {
    pub fn new(cfg: &FitConfig, layout: &BlockLayout, n: usize, out: &FitOutcome) -> Self {
        let fit = &out.fit;
        let levels = fit
            .levels
            .iter()
            .zip(&fit.penalties)
            .zip(&fit.supports)
            .enumerate()
            .map(|(j, ((lvl, pen), sup))| {
                // <H, sum_i v_i v_i^T> over the earlier levels
                let overlap: f64 = fit.levels[..j].iter().map(|e| e.v.dot(&(lvl.h.matrix() * &e.v))).sum();
                LevelReport {
                    lambda: pen.lambda,
                    beta: pen.beta,
                    eigenvector: lvl.v.iter().copied().collect(),
                    supports: sup.clone(),
                    iterations: lvl.iterations,
                    stages: lvl.stages,
                    converged: lvl.converged,
                    primal_residual: lvl.primal_residual,
                    dual_residual: lvl.dual_residual,
                    objective: lvl.objective,
                    final_rho: lvl.final_rho,
                    trace: lvl.h.trace(),
                    deflation_overlap: overlap,
                }
            })
            .collect();
        FitReport {
            schema_version: SCHEMA_VERSION,
            config: cfg.clone(),
            layout: layout.clone(),
            n,
            sigma2_hat: out.sigma2_hat.clone(),
            levels,
            max_cross_inner_product: fit.max_cross_inner_product(),
        }
    }

    pub fn eigenvectors(&self) -> Vec<Vec<f64>> {
        self.levels.iter().map(|l| l.eigenvector.clone()).collect()
    }
}

/// The score tables of a tuned fit as CSV rows, one per grid point and
/// level: `schema_version, level, lambda, beta, fold_1..fold_k, total`.
pub fn score_table_rows(cvs: &[CvResult]) -> (Vec<String>, Vec<Vec<String>>) {
    let folds = cvs.first().and_then(|c| c.table.first()).map_or(0, |r| r.fold_scores.len());
    let mut header: Vec<String> = ["schema_version", "level", "lambda", "beta"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=folds).map(|k| format!("fold_{k}")));
    header.push("total".into());
    let rows = cvs
        .iter()
        .enumerate()
        .flat_map(|(j, cv)| {
            cv.table.iter().map(move |r| {
                let mut row = vec![SCHEMA_VERSION.to_string(), (j + 1).to_string(), r.lambda.to_string(), r.beta.to_string()];
                row.extend(r.fold_scores.iter().map(f64::to_string));
                row.push(r.total.to_string());
                row
            })
        })
        .collect();
    (header, rows)
}

/// Eigenvectors as a `p x r` matrix.
pub fn report_vectors(report: &FitReport) -> DMatrix<f64> {
    let cols = report.eigenvectors();
    DMatrix::from_fn(report.layout.dim(), cols.len(), |i, j| cols[j][i])
}

/// `H_j` matrices of a fit, for `--dump-h`.
pub fn h_matrices(fit: &SipcaFit) -> Vec<DMatrix<f64>> {
    fit.levels.iter().map(|l| l.h.matrix().clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{SignalRegime, SimulationSetup};

    fn data() -> (DMatrix<f64>, BlockLayout) {
        let setup = SimulationSetup { views: 7, block_size: 3, n: 80, signal: SignalRegime::Strong, scale_to_dimension: false, seed: 2, ..Default::default() };
        (setup.generate().unwrap().data, setup.layout().unwrap())
    }

    #[test]
    fn report_round_trips_through_json() {
        let (x, l) = data();
        let cfg = FitConfig { rank: 2, penalty: PenaltyChoice::Fixed { lambda: 0.5, beta: 0.5 }, noise: NoiseSource::default(), admm: AdmmConfig::default() };
        let out = run_fit(&x, &l, &cfg).unwrap();
        let rep = FitReport::new(&cfg, &l, x.nrows(), &out);
        assert_eq!(rep.levels.len(), 2);
        assert!((rep.levels[0].trace - 1.0).abs() < 1e-6);
        assert!(rep.levels[1].deflation_overlap.abs() < 1e-6);
        let text = serde_json::to_string(&rep).unwrap();
        let back: FitReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
        assert_eq!(report_vectors(&back), out.fit.eigenvectors());
    }

    #[test]
    fn rank_is_checked() {
        let (x, l) = data();
        let cfg = FitConfig { rank: 0, penalty: PenaltyChoice::Fixed { lambda: 0.0, beta: 0.0 }, noise: NoiseSource::Zero, admm: AdmmConfig::default() };
        assert!(run_fit(&x, &l, &cfg).is_err());
    }

    #[test]
    fn score_table_layout() {
        let (x, l) = data();
        let grid = TuneGrid { betas: vec![0.0, 1.0], n_lambdas: 2, folds: 2, ..Default::default() };
        let cfg = FitConfig { rank: 1, penalty: PenaltyChoice::Tuned(grid), noise: NoiseSource::default(), admm: AdmmConfig::default() };
        let out = run_fit(&x, &l, &cfg).unwrap();
        let (header, rows) = score_table_rows(out.tuning.as_ref().unwrap());
        assert_eq!(header.join(","), "schema_version,level,lambda,beta,fold_1,fold_2,total");
        assert_eq!(rows.len(), 4);
    }
}
