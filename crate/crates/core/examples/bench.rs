// A small replicated benchmark over two heteroskedasticity levels, printed
// as the median (MAD) of the subspace error for both methods.

use sipca::bench::{find_summary, observations, run_bench, summarize, BenchSpec};
use sipca::simulate::SignalRegime;

pub fn run_example() -> sipca::Result<()> {
    let spec = BenchSpec {
        replications: 3,
        ns: vec![200],
        alphas: vec![0.0, 15.0],
        signals: vec![SignalRegime::Strong],
        views: 8,
        block_size: 8,
        ..Default::default()
    };
    let reps = run_bench(&spec)?;
    let summary = summarize(&observations(&reps));
    for cell in spec.cells() {
        for method in ["sipca", "sample_pca"] {
            if let Some(r) = find_summary(&summary, &cell, method, "subspace", "subspace_error") {
                println!("alpha {:>4}  {method:<10}  {:.3} ({:.3})", cell.alpha, r.median, r.mad);
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
