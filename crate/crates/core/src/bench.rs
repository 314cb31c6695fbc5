//! Simulation benchmark: for every `(signal, n, alpha)` cell, simulate
//! replicated datasets, fit SIPCA and sample PCA, and score both against
//! the truth. Results come out as tidy rows (one observation each) and as a
//! per-cell summary of medians and median absolute deviations.
//!
//! Replication `k` uses the same seed in every cell, so cells are compared
//! on common random numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmat::BlockLayout;
use crate::denoise::NoiseSource;
use crate::error::{Result, SipcaError};
use crate::io::SCHEMA_VERSION;
use crate::metrics::{mad, median, sample_pca_baseline, score_supports, subspace_error, EigenSupportScores};
use crate::pipeline::{run_fit, FitConfig, PenaltyChoice};
use crate::simulate::{SignalRegime, SimulatedData, SimulationSetup};
use crate::solver::{extract_supports, AdmmConfig, SUPPORT_ZERO_TOL};
use crate::tuning::{LambdaReference, PenaltyRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSpec {
    pub replications: usize,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub signals: Vec<SignalRegime>,
    pub views: usize,
    pub block_size: usize,
    pub fill: f64,
    pub sigma2_bar: f64,
    pub scale_to_dimension: bool,
    pub rank: usize,
    pub seed: u64,
    /// `None` picks [`default_penalty`] for each regime.
    pub penalty: Option<PenaltyChoice>,
    pub noise: NoiseSource,
    pub admm: AdmmConfig,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            replications: 50,
            ns: vec![200],
            alphas: vec![0.0, 8.0, 15.0],
            signals: vec![SignalRegime::Strong],
            views: 8,
            block_size: 20,
            fill: 0.5,
            sigma2_bar: 0.5,
            scale_to_dimension: true,
            rank: 3,
            seed: 0,
            penalty: None,
            noise: NoiseSource::default(),
            admm: AdmmConfig::default(),
        }
    }
}

/// Rule-based penalty used when a bench spec names none: half of the
/// off-diagonal `lambda_max`, from the full covariance with an even
/// lasso/group split under strong signal, and from the deflated covariance
/// with a pure lasso under weak signal.
pub fn default_penalty(signal: SignalRegime) -> PenaltyChoice {
    PenaltyChoice::Rule(match signal {
        SignalRegime::Strong => PenaltyRule { fraction: 0.5, beta: 0.5, reference: LambdaReference::Full },
        SignalRegime::Weak => PenaltyRule { fraction: 0.5, beta: 1.0, reference: LambdaReference::Deflated },
    })
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(SipcaError::InvalidParameter("replications must be at least 1".into()));
        }
        if self.ns.is_empty() || self.alphas.is_empty() || self.signals.is_empty() {
            return Err(SipcaError::InvalidParameter("ns, alphas and signals must be nonempty".into()));
        }
        if let Some(n) = self.ns.iter().find(|&&n| n < 2) {
            return Err(SipcaError::TooFewSamples { needed: 2, got: *n });
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(SipcaError::InvalidParameter(format!("alpha must be a nonnegative number, got {a}")));
        }
        if self.rank == 0 || self.rank > 3 {
            return Err(SipcaError::InvalidParameter(format!("rank {} outside 1..=3 of the simulated design", self.rank)));
        }
        self.admm.validate()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &signal in &self.signals {
            for &n in &self.ns {
                for &alpha in &self.alphas {
                    out.push(Cell { signal, n, alpha });
                }
            }
        }
        out
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        // splitmix64 step, so neighbouring replications get unrelated seeds
        let mut z = self.seed.wrapping_add((replication as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn setup(&self, cell: &Cell, seed: u64) -> SimulationSetup {
        SimulationSetup {
            views: self.views,
            block_size: self.block_size,
            n: cell.n,
            signal: cell.signal,
            scale_to_dimension: self.scale_to_dimension,
            alpha: cell.alpha,
            sigma2_bar: self.sigma2_bar,
            fill: self.fill,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub signal: SignalRegime,
    pub n: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub subspace_error: f64,
    pub supports: Vec<EigenSupportScores>,
    /// Solver iterations per level; empty for the baseline.
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub cell: Cell,
    pub replication: usize,
    pub seed: u64,
    /// `Err` carries the failure message; the run continues.
    pub sipca: std::result::Result<MethodScores, String>,
    pub baseline: std::result::Result<MethodScores, String>,
}

fn fit_sipca(spec: &BenchSpec, cell: &Cell, sim: &SimulatedData, layout: &BlockLayout) -> Result<MethodScores> {
    let cfg = FitConfig {
        rank: spec.rank,
        penalty: spec.penalty.clone().unwrap_or_else(|| default_penalty(cell.signal)),
        noise: spec.noise.clone(),
        admm: spec.admm,
    };
    let fit = run_fit(&sim.data, layout, &cfg)?.fit;
    let truth = sim.spec.eigenvectors.columns(0, spec.rank).into_owned();
    let supports = (0..spec.rank)
        .map(|j| {
            let t = extract_supports(&truth.column(j).into_owned(), layout, 0.0)?;
            score_supports(&t, &fit.supports[j], layout)
        })
        .collect::<Result<_>>()?;
    Ok(MethodScores {
        subspace_error: subspace_error(&truth, &fit.eigenvectors())?,
        supports,
        iterations: fit.levels.iter().map(|l| l.iterations).collect(),
    })
}

fn fit_baseline(spec: &BenchSpec, sim: &SimulatedData, layout: &BlockLayout) -> Result<MethodScores> {
    let v = sample_pca_baseline(&sim.data, layout, spec.rank)?;
    let truth = sim.spec.eigenvectors.columns(0, spec.rank).into_owned();
    let supports = (0..spec.rank)
        .map(|j| {
            let t = extract_supports(&truth.column(j).into_owned(), layout, 0.0)?;
            let e = extract_supports(&v.column(j).into_owned(), layout, SUPPORT_ZERO_TOL)?;
            score_supports(&t, &e, layout)
        })
        .collect::<Result<_>>()?;
    Ok(MethodScores { subspace_error: subspace_error(&truth, &v)?, supports, iterations: vec![] })
}

/// Runs every cell and replication. Tasks run in parallel on the current
/// rayon pool; the returned order is cells in spec order, then replications.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<Replication>> {
    spec.validate()?;
    // fail fast on a bad layout rather than once per replication
    spec.setup(&spec.cells()[0], 0).model()?;
    let tasks: Vec<(Cell, usize)> =
        spec.cells().into_iter().flat_map(|c| (0..spec.replications).map(move |k| (c, k))).collect();
    Ok(tasks
        .par_iter()
        .map(|&(cell, k)| {
            let seed = spec.replication_seed(k);
            let setup = spec.setup(&cell, seed);
            let (sipca, baseline) = match setup.generate().and_then(|sim| Ok((setup.layout()?, sim))) {
                Ok((layout, sim)) => (
                    fit_sipca(spec, &cell, &sim, &layout).map_err(|e| e.to_string()),
                    fit_baseline(spec, &sim, &layout).map_err(|e| e.to_string()),
                ),
                Err(e) => (Err(e.to_string()), Err(e.to_string())),
            };
            Replication { cell, replication: k, seed, sipca, baseline }
        })
        .collect())
}

pub const METHODS: [&str; 2] = ["sipca", "sample_pca"];
pub const SUPPORT_METRICS: [&str; 4] = ["element_sensitivity", "element_specificity", "block_sensitivity", "block_specificity"];

/// One tidy observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub cell: Cell,
    pub replication: usize,
    pub seed: u64,
    pub method: &'static str,
    /// `subspace` or `v1`, `v2`, ...
    pub component: String,
    pub metric: &'static str,
    pub value: f64,
    /// `ok`, or `failed` with the value NaN.
    pub status: &'static str,
}

fn observations_of(r: &Replication, method: &'static str, scores: &std::result::Result<MethodScores, String>) -> Vec<Observation> {
    let obs = |component: String, metric: &'static str, value: f64, status: &'static str| Observation {
        cell: r.cell,
        replication: r.replication,
        seed: r.seed,
        method,
        component,
        metric,
        value,
        status,
    };
    let Ok(m) = scores else {
        return vec![obs("subspace".into(), "subspace_error", f64::NAN, "failed")];
    };
    let mut out = vec![obs("subspace".into(), "subspace_error", m.subspace_error, "ok")];
    for (j, s) in m.supports.iter().enumerate() {
        let comp = format!("v{}", j + 1);
        let vals = [s.element.sensitivity, s.element.specificity, s.block.sensitivity, s.block.specificity];
        for (metric, v) in SUPPORT_METRICS.iter().zip(vals) {
            out.push(obs(comp.clone(), metric, v, "ok"));
        }
        if let Some(&it) = m.iterations.get(j) {
            out.push(obs(comp.clone(), "iterations", it as f64, "ok"));
        }
    }
    out
}

pub fn observations(reps: &[Replication]) -> Vec<Observation> {
    reps.iter()
        .flat_map(|r| {
            let mut v = observations_of(r, METHODS[0], &r.sipca);
            v.extend(observations_of(r, METHODS[1], &r.baseline));
            v
        })
        .collect()
}

pub const REPLICATION_HEADER: [&str; 11] =
    ["schema_version", "signal", "n", "alpha", "replication", "seed", "method", "component", "metric", "value", "status"];

pub fn replication_rows(obs: &[Observation]) -> Vec<Vec<String>> {
    obs.iter()
        .map(|o| {
            vec![
                SCHEMA_VERSION.to_string(),
                signal_name(o.cell.signal).into(),
                o.cell.n.to_string(),
                o.cell.alpha.to_string(),
                o.replication.to_string(),
                o.seed.to_string(),
                o.method.into(),
                o.component.clone(),
                o.metric.into(),
                o.value.to_string(),
                o.status.into(),
            ]
        })
        .collect()
}

fn signal_name(s: SignalRegime) -> &'static str {
    match s {
        SignalRegime::Weak => "weak",
        SignalRegime::Strong => "strong",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: Cell,
    pub method: &'static str,
    pub component: String,
    pub metric: &'static str,
    pub median: f64,
    pub mad: f64,
    pub count: usize,
    pub failures: usize,
}

/// Median and MAD of every `(cell, method, component, metric)` over the
/// successful replications, in first-appearance order.
pub fn summarize(obs: &[Observation]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Cell, &'static str, String, &'static str)> = Vec::new();
    for o in obs {
        let k = (o.cell, o.method, o.component.clone(), o.metric);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(cell, method, component, metric)| {
            let same = |o: &&Observation| o.cell == cell && o.method == method && o.component == component && o.metric == metric;
            let vals: Vec<f64> = obs.iter().filter(same).filter(|o| o.status == "ok").map(|o| o.value).collect();
            // a failed replication has only its subspace row, so count it once per method
            let failures = obs
                .iter()
                .filter(|o| o.cell == cell && o.method == method && o.status == "failed")
                .count();
            SummaryRow {
                cell,
                method,
                component,
                metric,
                median: median(&vals).unwrap_or(f64::NAN),
                mad: mad(&vals).unwrap_or(f64::NAN),
                count: vals.len(),
                failures,
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: [&str; 11] =
    ["schema_version", "signal", "n", "alpha", "method", "component", "metric", "median", "mad", "count", "failures"];

pub fn summary_rows(rows: &[SummaryRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                SCHEMA_VERSION.to_string(),
                signal_name(r.cell.signal).into(),
                r.cell.n.to_string(),
                r.cell.alpha.to_string(),
                r.method.into(),
                r.component.clone(),
                r.metric.into(),
                r.median.to_string(),
                r.mad.to_string(),
                r.count.to_string(),
                r.failures.to_string(),
            ]
        })
        .collect()
}

/// Looks up one summary value.
pub fn find_summary<'a>(rows: &'a [SummaryRow], cell: &Cell, method: &str, component: &str, metric: &str) -> Option<&'a SummaryRow> {
    rows.iter().find(|r| r.cell == *cell && r.method == method && r.component == component && r.metric == metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchSpec {
        BenchSpec {
            replications: 2,
            ns: vec![40],
            alphas: vec![0.0, 5.0],
            views: 8,
            block_size: 3,
            scale_to_dimension: false,
            admm: AdmmConfig { max_total_iters: 300, tol: 1e-5, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn one_row_per_cell_and_metric() {
        let spec = BenchSpec { replications: 1, ..tiny() };
        let reps = run_bench(&spec).unwrap();
        assert_eq!(reps.len(), 2);
        let summary = summarize(&observations(&reps));
        let cell = Cell { signal: SignalRegime::Strong, n: 40, alpha: 5.0 };
        let row = find_summary(&summary, &cell, "sipca", "subspace", "subspace_error").unwrap();
        assert_eq!((row.count, row.failures, row.mad), (1, 0, 0.0));
        // per cell: 2 methods x (1 subspace + 3 x 4 support) + 3 iteration rows
        assert_eq!(summary.len(), 2 * (2 * 13 + 3));
    }

    #[test]
    fn results_are_deterministic_and_paired() {
        let spec = tiny();
        let a = run_bench(&spec).unwrap();
        let b = run_bench(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].seed, a[2].seed);
        assert_ne!(a[0].seed, a[1].seed);
    }

    #[test]
    fn failures_are_flagged_not_fatal() {
        let r = Replication {
            cell: Cell { signal: SignalRegime::Weak, n: 10, alpha: 0.0 },
            replication: 0,
            seed: 1,
            sipca: Err("level 2 failed".into()),
            baseline: Ok(MethodScores { subspace_error: 0.5, supports: vec![], iterations: vec![] }),
        };
        let obs = observations(&[r]);
        assert_eq!(obs[0].status, "failed");
        assert!(obs[0].value.is_nan());
        let s = summarize(&obs);
        let row = find_summary(&s, &obs[0].cell, "sipca", "subspace", "subspace_error").unwrap();
        assert_eq!((row.count, row.failures), (0, 1));
        assert!(row.median.is_nan());
        assert_eq!(find_summary(&s, &obs[0].cell, "sample_pca", "subspace", "subspace_error").unwrap().median, 0.5);
    }

    #[test]
    fn summary_mad_matches_sort_oracle() {
        let cell = Cell { signal: SignalRegime::Strong, n: 5, alpha: 1.0 };
        let values = [0.3, 0.1, 0.9, 0.4, 0.2, 0.7];
        let obs: Vec<Observation> = values
            .iter()
            .enumerate()
            .map(|(k, &v)| Observation {
                cell,
                replication: k,
                seed: 0,
                method: "sipca",
                component: "subspace".into(),
                metric: "subspace_error",
                value: v,
                status: "ok",
            })
            .collect();
        let row = &summarize(&obs)[0];
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = sorted[2];
        let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
        dev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!((row.median, row.mad), (med, dev[2]));
    }

    #[test]
    fn spec_validation() {
        assert!(BenchSpec { replications: 0, ..tiny() }.validate().is_err());
        assert!(BenchSpec { alphas: vec![-1.0], ..tiny() }.validate().is_err());
        assert!(BenchSpec { ns: vec![1], ..tiny() }.validate().is_err());
        assert!(BenchSpec { rank: 4, ..tiny() }.validate().is_err());
    }
}
