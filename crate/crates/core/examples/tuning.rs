// Cross-validated choice of (lambda, beta) for the first two levels on a
// small dataset, with the score table of the first level.

use sipca::denoise::NoiseSource;
use sipca::simulate::{SignalRegime, SimulationSetup};
use sipca::tuning::{tune_sequential, TuneGrid};
use sipca::AdmmConfig;

pub fn run_example() -> sipca::Result<()> {
    let setup = SimulationSetup { views: 8, block_size: 5, n: 150, signal: SignalRegime::Strong, seed: 5, ..Default::default() };
    let sim = setup.generate()?;
    let grid = TuneGrid { betas: vec![0.0, 0.5, 1.0], n_lambdas: 4, folds: 3, seed: 1, include_zero: true };
    let cfg = AdmmConfig { tol: 1e-5, ..Default::default() };
    let (fit, cvs) = tune_sequential(&sim.data, &setup.layout()?, 2, &grid, &cfg, &NoiseSource::default())?;
    println!("lambda      beta  total");
    for row in &cvs[0].table {
        println!("{:<10.4e}  {:<4}  {:.4}", row.lambda, row.beta, row.total);
    }
    for (j, cv) in cvs.iter().enumerate() {
        println!("level {}: lambda {:.4e}, beta {}, views {:?}", j + 1, cv.lambda, cv.beta, fit.supports[j].blocks);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
