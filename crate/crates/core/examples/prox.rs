// The lasso plus group-lasso proximal operator on a two-view matrix: the
// weak off-diagonal block is removed entirely, small entries are zeroed.

use nalgebra::DMatrix;
use sipca::prox::{hierarchical_prox, kkt_residual};
use sipca::{BlockLayout, SymBlockMatrix, WeightMatrix};

pub fn run_example() -> sipca::Result<()> {
    let layout = BlockLayout::new(vec![2, 3])?;
    let a = SymBlockMatrix::symmetrized(
        layout.clone(),
        DMatrix::from_row_slice(5, 5, &[
            1.0, 0.8, 0.05, -0.1, 0.02, //
            0.8, 0.9, 0.03, 0.0, 0.1, //
            0.05, 0.03, 0.7, -0.4, 0.3, //
            -0.1, 0.0, -0.4, 0.6, 0.05, //
            0.02, 0.1, 0.3, 0.05, 0.5,
        ]),
    )?;
    let w = WeightMatrix::size_balanced(&layout);
    let x = hierarchical_prox(&a, 0.05, 0.1, &w)?;
    println!("{:.4}", x.matrix());
    println!("KKT residual {:.1e}", kkt_residual(&x, &a, 0.05, 0.1, &w)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
