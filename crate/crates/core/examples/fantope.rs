// Fantope and deflated Fantope projections of a small symmetric matrix.

use nalgebra::{DMatrix, DVector};
use sipca::fantope::{deflated_fantope_project, fantope_project, Projector};
use sipca::linalg::sym_eigenvalues;
use sipca::{BlockLayout, SymBlockMatrix};

pub fn run_example() -> sipca::Result<()> {
    let layout = BlockLayout::new(vec![2, 2])?;
    let a = SymBlockMatrix::new(
        layout.clone(),
        DMatrix::from_row_slice(4, 4, &[
            2.0, 0.5, 0.0, 0.1, //
            0.5, 1.5, 0.2, 0.0, //
            0.0, 0.2, 0.3, 0.4, //
            0.1, 0.0, 0.4, 0.9,
        ]),
    )?;
    let h = fantope_project(&a)?;
    println!("projection eigenvalues: {:.4?}", sym_eigenvalues(h.matrix()));
    println!("trace {:.6}", h.trace());

    let e1 = DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
    let pi = Projector::empty(&layout).extend(&e1)?;
    let hd = deflated_fantope_project(&a, &pi)?;
    println!("deflated: trace {:.6}, <H, Pi> = {:.2e}", hd.trace(), hd.dot(pi.matrix()));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
