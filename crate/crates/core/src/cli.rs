//! The `sipca` command line: simulate, fit, evaluate, bench, tune-report.
//!
//! Each command accepts an optional JSON or TOML config mirroring its
//! flags; flags given on the command line override the file. Exit codes:
//! 2 usage or invalid input, 3 I/O or file format, 4 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{observations, replication_rows, run_bench, summarize, summary_rows, BenchSpec, REPLICATION_HEADER, SUMMARY_HEADER};
use crate::blockmat::BlockLayout;
use crate::denoise::{BemaConfig, NoiseSource};
use crate::error::SipcaError;
use crate::io::{self, Truth, SCHEMA_VERSION};
use crate::metrics::{sample_pca_baseline, score_supports, subspace_error, EigenSupportScores};
use crate::pipeline::{h_matrices, report_vectors, run_fit, score_table_rows, FitConfig, FitReport, PenaltyChoice};
use crate::simulate::{SignalRegime, SimulationSetup};
use crate::solver::{extract_supports, AdmmConfig, SolverKind, SUPPORT_ZERO_TOL};
use crate::tuning::{tune_sequential, LambdaReference, PenaltyRule, TuneGrid};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    /// Tags a library error with the stage it came from.
    fn at(stage: &str) -> impl FnOnce(SipcaError) -> CliError + '_ {
        move |e| {
            let code = if e.is_io() {
                EXIT_IO
            } else if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_USAGE
            };
            CliError { code, message: format!("{stage}: {e}") }
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sipca", version, about = "Sparse and integrative PCA for multiview data")]
pub struct Cli {
    /// Worker threads; SIPCA_THREADS caps this.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a multiview spiked-covariance dataset.
    Simulate(SimulateArgs),
    /// Fit sparse eigenvectors to a data matrix.
    Fit(FitArgs),
    /// Score a fit against simulated truth.
    Evaluate(EvaluateArgs),
    /// Run the replicated simulation benchmark.
    Bench(BenchArgs),
    /// Cross-validate the penalty grid and write the score table.
    TuneReport(TuneReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SignalArg {
    Weak,
    Strong,
}

impl From<SignalArg> for SignalRegime {
    fn from(s: SignalArg) -> Self {
        match s {
            SignalArg::Weak => SignalRegime::Weak,
            SignalArg::Strong => SignalRegime::Strong,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub signal: Option<SignalArg>,
    /// Fraction of each active block that is nonzero.
    #[arg(long)]
    pub gamma_fill: Option<f64>,
    /// Mean noise variance across views.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Use the preset eigenvalues as given instead of scaling by p/1000.
    #[arg(long)]
    pub no_scale: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    LaAdmm,
    Admm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    Full,
    Deflated,
}

#[derive(Debug, Args, Default)]
pub struct SolverFlags {
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub iters_per_stage: Option<usize>,
    #[arg(long)]
    pub max_stages: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

impl SolverFlags {
    fn apply(&self, cfg: &mut AdmmConfig) {
        if let Some(s) = self.solver {
            cfg.solver = match s {
                SolverArg::LaAdmm => SolverKind::LaAdmm,
                SolverArg::Admm => SolverKind::Admm,
            };
        }
        set(&mut cfg.rho0, self.rho0);
        set(&mut cfg.alpha0, self.alpha0);
        set(&mut cfg.iters_per_stage, self.iters_per_stage);
        set(&mut cfg.max_stages, self.max_stages);
        set(&mut cfg.tol, self.tol);
        set(&mut cfg.max_total_iters, self.max_iters);
    }
}

#[derive(Debug, Args, Default)]
pub struct GridFlags {
    /// Comma-separated beta values.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub n_lambdas: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Add lambda = 0 to the grid.
    #[arg(long)]
    pub include_zero: bool,
    /// Seed of the fold shuffle.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl GridFlags {
    fn apply(&self, grid: &mut TuneGrid) {
        set(&mut grid.betas, self.betas.clone());
        set(&mut grid.n_lambdas, self.n_lambdas);
        set(&mut grid.folds, self.folds);
        set(&mut grid.seed, self.seed);
        grid.include_zero |= self.include_zero;
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// lambda as this fraction of the 95% off-diagonal quantile of S.
    #[arg(long, conflicts_with = "lambda")]
    pub lambda_frac: Option<f64>,
    #[arg(long, value_enum, requires = "lambda_frac")]
    pub lambda_ref: Option<ReferenceArg>,
    /// Choose (lambda, beta) per level by cross-validation.
    #[arg(long, conflicts_with_all = ["lambda", "lambda_frac"])]
    pub tune: bool,
    #[command(flatten)]
    pub grid: GridFlags,
    /// bema, zero, or file:<path> with one variance per view.
    #[arg(long)]
    pub noise: Option<String>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub out: PathBuf,
    /// Score table CSV for --tune; defaults to <out>.scores.csv.
    #[arg(long)]
    pub score_table: Option<PathBuf>,
    /// Directory for the H matrices, one CSV per level.
    #[arg(long)]
    pub dump_h: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Data the fit came from; adds sample-PCA rows.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub signals: Option<Vec<SignalArg>>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneReportArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[command(flatten)]
    pub grid: GridFlags,
    #[arg(long)]
    pub noise: Option<String>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub out: PathBuf,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn parse_noise(spec: &str) -> CliResult<NoiseSource> {
    match spec {
        "bema" => Ok(NoiseSource::Bema(BemaConfig::default())),
        "zero" => Ok(NoiseSource::Zero),
        _ => match spec.strip_prefix("file:") {
            Some(path) => io::read_noise_variances(Path::new(path)).map(NoiseSource::Fixed).map_err(CliError::at("reading noise variances")),
            None => Err(CliError::usage(format!("--noise must be bema, zero or file:<path>, got {spec:?}"))),
        },
    }
}

/// Parses arguments, sizes the thread pool and runs the command. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn thread_count(jobs: Option<usize>) -> CliResult<usize> {
    let cap = match std::env::var("SIPCA_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&t| t > 0).ok_or_else(|| {
            CliError::usage(format!("SIPCA_THREADS must be a positive integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    if jobs == Some(0) {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let want = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(cap.map_or(want, |c| want.min(c)))
}

pub fn run(cli: Cli) -> CliResult<()> {
    let threads = thread_count(cli.jobs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bench(a) => bench(a),
        Command::TuneReport(a) => tune_report(a),
    })
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> CliResult<T> {
    match path {
        Some(p) => io::read_config(p).map_err(CliError::at("reading config")),
        None => Ok(T::default()),
    }
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut setup: SimulationSetup = load_config(&a.config)?;
    set(&mut setup.views, a.views);
    set(&mut setup.block_size, a.block_size);
    set(&mut setup.n, a.n);
    set(&mut setup.alpha, a.alpha);
    set(&mut setup.signal, a.signal.map(Into::into));
    set(&mut setup.fill, a.gamma_fill);
    set(&mut setup.sigma2_bar, a.sigma2);
    set(&mut setup.seed, a.seed);
    if a.no_scale {
        setup.scale_to_dimension = false;
    }
    if setup.n < 2 {
        return Err(CliError::usage(format!("--n must be at least 2 for any downstream fit, got {}", setup.n)));
    }
    let sim = setup.generate().map_err(CliError::at("simulating"))?;
    let truth = Truth::from_simulation(&setup, &sim).map_err(CliError::at("simulating"))?;
    let write = CliError::at("writing output");
    io::write_matrix_csv(&a.out.join("data.csv"), &sim.data)
        .and_then(|_| io::write_layout(&a.out.join("layout.json"), &sim.spec.layout))
        .and_then(|_| io::write_json(&a.out.join("truth.json"), &truth))
        .map_err(write)
}

fn read_inputs(data: &Path, layout: &Path) -> CliResult<(nalgebra::DMatrix<f64>, BlockLayout)> {
    let x = io::read_matrix_csv(data).map_err(CliError::at("reading data"))?;
    let l = io::read_layout(layout).map_err(CliError::at("reading layout"))?;
    if x.ncols() != l.dim() {
        return Err(CliError::usage(format!("data has {} columns but the layout covers {}", x.ncols(), l.dim())));
    }
    Ok((x, l))
}

fn resolve_fit_config(a: &FitArgs) -> CliResult<FitConfig> {
    let file: Option<FitConfig> = match &a.config {
        Some(p) => Some(io::read_config(p).map_err(CliError::at("reading config"))?),
        None => None,
    };
    let rank = a.rank.or(file.as_ref().map(|c| c.rank)).ok_or_else(|| CliError::usage("--rank is required"))?;
    let penalty = if a.tune {
        let mut grid = match file.as_ref().map(|c| &c.penalty) {
            Some(PenaltyChoice::Tuned(g)) => g.clone(),
            _ => TuneGrid::default(),
        };
        a.grid.apply(&mut grid);
        PenaltyChoice::Tuned(grid)
    } else if let Some(fraction) = a.lambda_frac {
        let reference = match a.lambda_ref {
            Some(ReferenceArg::Deflated) => LambdaReference::Deflated,
            _ => LambdaReference::Full,
        };
        PenaltyChoice::Rule(PenaltyRule { fraction, beta: a.beta.unwrap_or(0.0), reference })
    } else if let Some(lambda) = a.lambda {
        PenaltyChoice::Fixed { lambda, beta: a.beta.unwrap_or(0.0) }
    } else {
        match file.as_ref().map(|c| c.penalty.clone()) {
            Some(mut p) => {
                if let (PenaltyChoice::Fixed { beta, .. } | PenaltyChoice::Rule(PenaltyRule { beta, .. }), Some(b)) = (&mut p, a.beta) {
                    *beta = b;
                }
                p
            }
            None => return Err(CliError::usage("one of --lambda, --lambda-frac or --tune is required")),
        }
    };
    let noise = match &a.noise {
        Some(s) => parse_noise(s)?,
        None => file.as_ref().map(|c| c.noise.clone()).unwrap_or_default(),
    };
    let mut admm = file.as_ref().map(|c| c.admm).unwrap_or_default();
    a.solver.apply(&mut admm);
    Ok(FitConfig { rank, penalty, noise, admm })
}

fn fit(a: FitArgs) -> CliResult<()> {
    let cfg = resolve_fit_config(&a)?;
    let (x, layout) = read_inputs(&a.data, &a.layout)?;
    let out = run_fit(&x, &layout, &cfg).map_err(CliError::at("fitting"))?;
    let report = FitReport::new(&cfg, &layout, x.nrows(), &out);
    io::write_json(&a.out, &report).map_err(CliError::at("writing fit"))?;
    if let Some(cvs) = &out.tuning {
        let path = a.score_table.clone().unwrap_or_else(|| with_suffix(&a.out, ".scores.csv"));
        let (header, rows) = score_table_rows(cvs);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        io::write_csv(&path, &header, rows).map_err(CliError::at("writing score table"))?;
    }
    if let Some(dir) = &a.dump_h {
        for (j, h) in h_matrices(&out.fit).iter().enumerate() {
            io::write_matrix_csv(&dir.join(format!("h_{}.csv", j + 1)), h).map_err(CliError::at("writing H"))?;
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub const METRICS_HEADER: [&str; 8] = [
    "schema_version",
    "method",
    "component",
    "subspace_error",
    "element_sensitivity",
    "element_specificity",
    "block_sensitivity",
    "block_specificity",
];

fn metric_rows(method: &str, truth: &nalgebra::DMatrix<f64>, est: &nalgebra::DMatrix<f64>, layout: &BlockLayout) -> Result<Vec<Vec<String>>, SipcaError> {
    let mut rows = Vec::new();
    for j in 0..est.ncols() {
        let t = truth.column(j).into_owned();
        let e = est.column(j).into_owned();
        let scores: EigenSupportScores =
            score_supports(&extract_supports(&t, layout, 0.0)?, &extract_supports(&e, layout, SUPPORT_ZERO_TOL)?, layout)?;
        let err = subspace_error(&truth.columns(j, 1).into_owned(), &est.columns(j, 1).into_owned())?;
        rows.push(vec![
            SCHEMA_VERSION.to_string(),
            method.into(),
            format!("v{}", j + 1),
            err.to_string(),
            scores.element.sensitivity.to_string(),
            scores.element.specificity.to_string(),
            scores.block.sensitivity.to_string(),
            scores.block.specificity.to_string(),
        ]);
    }
    let mut total = vec![SCHEMA_VERSION.to_string(), method.into(), "subspace".into(), subspace_error(truth, est)?.to_string()];
    total.extend(std::iter::repeat_n(String::new(), 4));
    rows.push(total);
    Ok(rows)
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let report: FitReport = io::read_json(&a.fit).map_err(CliError::at("reading fit"))?;
    let truth: Truth = io::read_json(&a.truth).map_err(CliError::at("reading truth"))?;
    if report.layout != truth.layout {
        return Err(CliError::usage("fit and truth have different layouts"));
    }
    let r = report.levels.len();
    if r > truth.eigenvectors.len() {
        return Err(CliError::usage(format!("fit has rank {r}, truth only {}", truth.eigenvectors.len())));
    }
    let tv = truth.eigenvector_matrix().map_err(CliError::at("reading truth"))?.columns(0, r).into_owned();
    let mut rows = metric_rows("sipca", &tv, &report_vectors(&report), &truth.layout).map_err(CliError::at("scoring fit"))?;
    if let Some(data) = &a.data {
        let x = io::read_matrix_csv(data).map_err(CliError::at("reading data"))?;
        let v = sample_pca_baseline(&x, &truth.layout, r).map_err(CliError::at("sample PCA"))?;
        rows.extend(metric_rows("sample_pca", &tv, &v, &truth.layout).map_err(CliError::at("scoring sample PCA"))?);
    }
    io::write_csv(&a.out, &METRICS_HEADER, rows).map_err(CliError::at("writing metrics"))
}

#[derive(Serialize)]
struct BenchEcho<'a> {
    schema_version: u32,
    spec: &'a BenchSpec,
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let mut spec: BenchSpec = load_config(&a.config)?;
    set(&mut spec.replications, a.replications);
    set(&mut spec.ns, a.ns);
    set(&mut spec.alphas, a.alphas);
    set(&mut spec.signals, a.signals.map(|v| v.into_iter().map(Into::into).collect()));
    set(&mut spec.views, a.views);
    set(&mut spec.block_size, a.block_size);
    set(&mut spec.rank, a.rank);
    set(&mut spec.seed, a.seed);
    a.solver.apply(&mut spec.admm);
    let reps = run_bench(&spec).map_err(CliError::at("bench"))?;
    let obs = observations(&reps);
    let summary = summarize(&obs);
    io::write_json(&a.out.join("bench_config.json"), &BenchEcho { schema_version: SCHEMA_VERSION, spec: &spec })
        .and_then(|_| io::write_csv(&a.out.join("bench_replications.csv"), &REPLICATION_HEADER, replication_rows(&obs)))
        .and_then(|_| io::write_csv(&a.out.join("bench_summary.csv"), &SUMMARY_HEADER, summary_rows(&summary)))
        .map_err(CliError::at("writing bench output"))?;
    let failed = reps.iter().filter(|r| r.sipca.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} replications failed; see the status column", reps.len());
    }
    Ok(())
}

fn tune_report(a: TuneReportArgs) -> CliResult<()> {
    let (x, layout) = read_inputs(&a.data, &a.layout)?;
    let mut grid = TuneGrid::default();
    a.grid.apply(&mut grid);
    let noise = match &a.noise {
        Some(s) => parse_noise(s)?,
        None => NoiseSource::default(),
    };
    let mut admm = AdmmConfig::default();
    a.solver.apply(&mut admm);
    let (_, cvs) = tune_sequential(&x, &layout, a.rank, &grid, &admm, &noise).map_err(CliError::at("tuning"))?;
    let (header, rows) = score_table_rows(&cvs);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_csv(&a.out, &header, rows).map_err(CliError::at("writing score table"))?;
    for (j, cv) in cvs.iter().enumerate() {
        println!("level {}: lambda {} beta {} score {}", j + 1, cv.lambda, cv.beta, cv.score);
    }
    Ok(())
}
