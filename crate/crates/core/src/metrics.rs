//! Subspace error, support recovery scores, the sample-PCA baseline and the
//! robust summaries used to report replications.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blockmat::BlockLayout;
use crate::denoise::sample_covariance;
use crate::error::{Result, SipcaError};
use crate::linalg::{fix_sign, sym_eigen};
use crate::solver::Supports;

const ORTHONORMAL_TOL: f64 = 1e-6;

fn check_orthonormal(v: &DMatrix<f64>, what: &str) -> Result<()> {
    let gram = v.transpose() * v;
    let dev = (gram - DMatrix::identity(v.ncols(), v.ncols())).amax();
    if dev > ORTHONORMAL_TOL {
        return Err(SipcaError::InvalidParameter(format!("{what} columns are not orthonormal (max deviation {dev:e})")));
    }
    Ok(())
}

/// `||V V^T - W W^T||_F / sqrt(r)`, in `[0, sqrt 2]`.
pub fn subspace_error(v_true: &DMatrix<f64>, v_hat: &DMatrix<f64>) -> Result<f64> {
    if v_true.shape() != v_hat.shape() {
        return Err(SipcaError::Dimension(format!("truth is {:?}, estimate is {:?}", v_true.shape(), v_hat.shape())));
    }
    if v_true.ncols() == 0 {
        return Err(SipcaError::Dimension("rank must be at least 1".into()));
    }
    check_orthonormal(v_true, "true")?;
    check_orthonormal(v_hat, "estimated")?;
    // ||P - Q||^2 = 2r - 2 ||V^T W||^2 for rank-r orthogonal projectors, but the
    // direct difference is cheap at these sizes and needs no rounding guard.
    let d = v_true * v_true.transpose() - v_hat * v_hat.transpose();
    Ok(d.norm() / (v_true.ncols() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportScores {
    pub sensitivity: f64,
    pub specificity: f64,
}

/// True positive and true negative rates of `est` against `truth`, both
/// subsets of `0..universe`. An empty truth has sensitivity 1; a full truth
/// has specificity 1.
pub fn support_scores(truth: &[usize], est: &[usize], universe: usize) -> Result<SupportScores> {
    let mut t = vec![false; universe];
    let mut e = vec![false; universe];
    for (set, mask) in [(truth, &mut t), (est, &mut e)] {
        for &i in set {
            if i >= universe {
                return Err(SipcaError::Dimension(format!("index {i} outside universe of size {universe}")));
            }
            mask[i] = true;
        }
    }
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..universe {
        if t[i] {
            pos += 1;
            tp += e[i] as usize;
        } else {
            neg += 1;
            tn += !e[i] as usize;
        }
    }
    Ok(SupportScores {
        sensitivity: if pos == 0 { 1.0 } else { tp as f64 / pos as f64 },
        specificity: if neg == 0 { 1.0 } else { tn as f64 / neg as f64 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSupportScores {
    pub element: SupportScores,
    pub block: SupportScores,
}

pub fn score_supports(truth: &Supports, est: &Supports, layout: &BlockLayout) -> Result<EigenSupportScores> {
    Ok(EigenSupportScores {
        element: support_scores(&truth.elements, &est.elements, layout.dim())?,
        block: support_scores(&truth.blocks, &est.blocks, layout.num_views())?,
    })
}

/// Top-`r` eigenvectors of the raw sample covariance, sign-fixed.
pub fn sample_pca_baseline(x: &DMatrix<f64>, layout: &BlockLayout, r: usize) -> Result<DMatrix<f64>> {
    if r == 0 || r > layout.dim() {
        return Err(SipcaError::InvalidParameter(format!("rank {r} outside 1..={}", layout.dim())));
    }
    let cov = sample_covariance(x, layout)?;
    let eig = sym_eigen(cov.matrix());
    let mut v = eig.vectors.columns(0, r).into_owned();
    for mut c in v.column_iter_mut() {
        let mut col = c.clone_owned();
        fix_sign(&mut col);
        c.copy_from(&col);
    }
    Ok(v)
}

/// Smallest nonzero magnitude among the entries of `v`, if any.
pub fn min_nonzero_magnitude(v: &[f64]) -> Option<f64> {
    v.iter().map(|x| x.abs()).filter(|&a| a > 0.0).min_by(f64::total_cmp)
}

/// Nearest-rank median: the `ceil(n/2)`-th smallest value.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[v.len().div_ceil(2) - 1])
}

/// Raw median absolute deviation about the nearest-rank median, without a
/// consistency constant.
pub fn mad(values: &[f64]) -> Option<f64> {
    let m = median(values)?;
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}
