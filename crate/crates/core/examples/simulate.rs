// Draws one dataset from the three-spike multiview design and prints its
// shape, noise levels and true supports.

use sipca::simulate::{SignalRegime, SimulationSetup};

pub fn run_example() -> sipca::Result<()> {
    let setup = SimulationSetup {
        views: 8,
        block_size: 10,
        n: 100,
        signal: SignalRegime::Strong,
        alpha: 8.0,
        seed: 7,
        ..Default::default()
    };
    let sim = setup.generate()?;
    println!("data: {} x {}", sim.data.nrows(), sim.data.ncols());
    println!("eigenvalues: {:?}", sim.spec.eigenvalues);
    let sig: Vec<String> = sim.spec.noise_variances.iter().map(|s| format!("{s:.3}")).collect();
    println!("noise variances: [{}]", sig.join(", "));
    for (j, views) in sim.design.block_supports.iter().enumerate() {
        let v = sim.spec.eigenvectors.column(j);
        let nnz = v.iter().filter(|x| **x != 0.0).count();
        println!("v{}: views {:?}, {nnz} nonzero coordinates", j + 1, views);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
