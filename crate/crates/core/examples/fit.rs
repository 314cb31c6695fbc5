// End to end: simulate strong-signal data, denoise, fit three sparse
// eigenvectors, and compare against the truth and sample PCA.

use sipca::metrics::{sample_pca_baseline, score_supports, subspace_error};
use sipca::pipeline::{run_fit, FitConfig, PenaltyChoice};
use sipca::simulate::{SignalRegime, SimulationSetup};
use sipca::solver::extract_supports;
use sipca::tuning::{LambdaReference, PenaltyRule};
use sipca::AdmmConfig;

pub fn run_example() -> sipca::Result<()> {
    let setup = SimulationSetup { views: 8, block_size: 10, n: 200, signal: SignalRegime::Strong, alpha: 8.0, seed: 11, ..Default::default() };
    let sim = setup.generate()?;
    let layout = setup.layout()?;

    let cfg = FitConfig {
        rank: 3,
        penalty: PenaltyChoice::Rule(PenaltyRule { fraction: 0.5, beta: 0.5, reference: LambdaReference::Full }),
        noise: Default::default(),
        admm: AdmmConfig::default(),
    };
    let out = run_fit(&sim.data, &layout, &cfg)?;
    let v = out.fit.eigenvectors();
    for (j, lvl) in out.fit.levels.iter().enumerate() {
        let truth = extract_supports(&sim.spec.eigenvectors.column(j).into_owned(), &layout, 0.0)?;
        let s = score_supports(&truth, &out.fit.supports[j], &layout)?;
        println!(
            "v{}: {} iterations, views {:?} (true {:?}), element sens/spec {:.2}/{:.2}",
            j + 1,
            lvl.iterations,
            out.fit.supports[j].blocks,
            truth.blocks,
            s.element.sensitivity,
            s.element.specificity
        );
    }
    println!("max |v_i . v_j| = {:.1e}", out.fit.max_cross_inner_product());
    let base = sample_pca_baseline(&sim.data, &layout, 3)?;
    println!("subspace error: sipca {:.3}, sample PCA {:.3}", subspace_error(&sim.spec.eigenvectors, &v)?, subspace_error(&sim.spec.eigenvectors, &base)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
