// Fixed-penalty ADMM against the staged variant with growing penalty, on
// the same weak-signal problem.

use sipca::denoise::{denoise, NoiseSource};
use sipca::fantope::Projector;
use sipca::simulate::SimulationSetup;
use sipca::solver::{solve_level, SolverKind};
use sipca::tuning::lambda_max;
use sipca::{AdmmConfig, PenaltyConfig};

pub fn run_example() -> sipca::Result<()> {
    let setup = SimulationSetup { views: 8, block_size: 10, n: 400, seed: 2, ..Default::default() };
    let sim = setup.generate()?;
    let layout = setup.layout()?;
    let s = denoise(&sim.data, &layout, &NoiseSource::default())?.s;
    let pi = Projector::empty(&layout);
    let pen = PenaltyConfig::with_default_weights(0.5 * lambda_max(&s, &pi), 1.0, &layout)?;
    for kind in [SolverKind::Admm, SolverKind::LaAdmm] {
        let cfg = AdmmConfig { solver: kind, ..Default::default() };
        let lvl = solve_level(&s, &pi, &pen, &cfg)?;
        println!("{kind:?}: {} iterations, converged {}, objective {:.8}", lvl.iterations, lvl.converged, lvl.objective);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
