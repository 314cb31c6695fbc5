// Subspace error, support scores and the median/MAD summaries.

use nalgebra::DMatrix;
use sipca::metrics::{mad, median, support_scores, subspace_error};

pub fn run_example() -> sipca::Result<()> {
    let t = std::f64::consts::FRAC_PI_6;
    let truth = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
    let est = DMatrix::from_column_slice(3, 1, &[t.cos(), t.sin(), 0.0]);
    // for unit vectors at angle t the error is sqrt(2) sin t
    println!("error at 30 degrees: {:.4}", subspace_error(&truth, &est)?);

    let s = support_scores(&[0, 1, 2, 3], &[1, 2, 3, 7], 10)?;
    println!("sensitivity {:.2}, specificity {:.3}", s.sensitivity, s.specificity);

    let errs = [0.12, 0.31, 0.09, 0.15, 0.11];
    println!("median {:?}, MAD {:?}", median(&errs), mad(&errs));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
