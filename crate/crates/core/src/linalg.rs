//! Symmetric eigendecomposition. Full decompositions use faer; the partial
//! one used inside projections goes through LAPACK's tridiagonal bisection
//! and inverse iteration, checked against its residual and falling back to
//! the full decomposition.

use faer::{Mat, Side};
use lapack::{dstebz, dstein, dsterf, dsytrd};
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SipcaError};

// Links the system OpenBLAS build of LAPACK.
extern crate openblas_src;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order and
/// eigenvectors in the matching columns.
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn sort_descending(vals: &[f64], vecs: &DMatrix<f64>) -> SymEigen {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));
    SymEigen {
        values: order.iter().map(|&i| vals[i]).collect(),
        vectors: DMatrix::from_fn(vecs.nrows(), order.len(), |r, c| vecs[(r, order[c])]),
    }
}

fn faer_eigen(a: &DMatrix<f64>) -> Option<SymEigen> {
    let n = a.nrows();
    let m = Mat::from_fn(n, n, |i, j| a[(i, j)]);
    let eig = m.self_adjoint_eigen(Side::Lower).ok()?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| u[(r, c)]);
    finite(sort_descending(&vals, &vecs))
}

fn nalgebra_eigen(a: &DMatrix<f64>) -> Option<SymEigen> {
    let eig = a.clone().symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    finite(sort_descending(&vals, &eig.eigenvectors))
}

fn finite(e: SymEigen) -> Option<SymEigen> {
    (e.values.iter().all(|x| x.is_finite()) && e.vectors.iter().all(|x| x.is_finite())).then_some(e)
}

/// Full decomposition (faer, with nalgebra as a second opinion). Returns
/// NaNs only if both backends fail, which requires non-finite input.
pub fn sym_eigen(a: &DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    if n == 0 {
        return SymEigen { values: vec![], vectors: DMatrix::zeros(0, 0) };
    }
    faer_eigen(a)
        .or_else(|| nalgebra_eigen(a))
        .unwrap_or_else(|| SymEigen { values: vec![f64::NAN; n], vectors: DMatrix::from_element(n, n, f64::NAN) })
}

/// Householder reduction `A = Q T Q^T` with `T` symmetric tridiagonal.
struct Tridiagonal {
    n: usize,
    reflectors: Vec<f64>,
    tau: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    fn new(a: &DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        let ni = n as i32;
        let mut reflectors = a.as_slice().to_vec();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.max(2) - 1];
        let mut tau = vec![0.0; n.max(2) - 1];
        let mut work = vec![0.0; 64 * n.max(1)];
        let lw = work.len() as i32;
        let mut info = 0;
        unsafe { dsytrd(b'L', ni, &mut reflectors, ni, &mut diag, &mut off, &mut tau, &mut work, lw, &mut info) };
        (info == 0).then_some(Tridiagonal { n, reflectors, tau, diag, off })
    }

    fn eigenvalues(&self) -> Option<Vec<f64>> {
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        let mut info = 0;
        unsafe { dsterf(self.n as i32, &mut d, &mut e, &mut info) };
        if info != 0 || d.iter().any(|x| !x.is_finite()) {
            return None;
        }
        d.sort_by(|x, y| y.total_cmp(x));
        Some(d)
    }

    /// Eigenvectors of the `k` largest eigenvalues, in descending order.
    fn top_vectors(&self, k: usize) -> Option<DMatrix<f64>> {
        let n = self.n;
        if k == 0 {
            return Some(DMatrix::zeros(n, 0));
        }
        let ni = n as i32;
        let mut found = 0;
        let mut nsplit = [0i32];
        let mut w = vec![0.0; n];
        let mut iblock = vec![0i32; n];
        let mut isplit = vec![0i32; n];
        let mut work = vec![0.0; 5 * n];
        let mut iwork = vec![0i32; 3 * n];
        let mut info = 0;
        let abstol = 2.0 * f64::MIN_POSITIVE;
        unsafe {
            dstebz(
                b'I', b'B', ni, 0.0, 0.0, ni - k as i32 + 1, ni, abstol, &self.diag, &self.off, &mut found,
                &mut nsplit, &mut w, &mut iblock, &mut isplit, &mut work, &mut iwork, &mut info,
            )
        };
        if info != 0 || found as usize != k {
            return None;
        }
        let mut z = vec![0.0; n * k];
        let mut ifail = vec![0i32; k];
        unsafe {
            dstein(
                ni, &self.diag, &self.off, k as i32, &w, &iblock, &isplit, &mut z, ni, &mut work, &mut iwork[..n],
                &mut ifail, &mut info,
            )
        };
        if info != 0 {
            return None;
        }
        // back-transform: Q z = H(0) H(1) ... H(n-2) z, with
        // H(i) = I - tau_i u u^T, u = (0.., 1 at i+1, A[i+2.., i])
        let a = &self.reflectors;
        for c in 0..k {
            let col = &mut z[c * n..(c + 1) * n];
            for i in (0..n.saturating_sub(1)).rev() {
                let tau = self.tau[i];
                if tau == 0.0 {
                    continue;
                }
                let u = &a[i * n + i + 2..(i + 1) * n];
                let mut dot = col[i + 1];
                for (x, y) in u.iter().zip(&col[i + 2..]) {
                    dot += x * y;
                }
                let f = tau * dot;
                col[i + 1] -= f;
                for (x, y) in u.iter().zip(col[i + 2..].iter_mut()) {
                    *y -= f * x;
                }
            }
        }
        if z.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let vecs = DMatrix::from_vec(n, k, z);
        Some(sort_descending(&w[..k], &vecs).vectors)
    }
}

// Residual and orthonormality checks on the leading pairs.
fn pairs_are_accurate(a: &DMatrix<f64>, values: &[f64], vectors: &DMatrix<f64>) -> bool {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let k = vectors.ncols();
    let res = a * vectors - vectors * DMatrix::from_diagonal(&DVector::from_row_slice(&values[..k]));
    if !(res.norm() <= 1e-9 * scale) {
        return false;
    }
    (vectors.transpose() * vectors - DMatrix::<f64>::identity(k, k)).amax() <= 1e-10
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return vec![];
    }
    Tridiagonal::new(a)
        .and_then(|t| t.eigenvalues())
        .unwrap_or_else(|| sym_eigen(a).values)
}

/// All eigenvalues (descending) and the eigenvectors of the largest `k`,
/// where `k` is chosen by `count` from the eigenvalues. Only `k` vectors
/// are computed, which is much cheaper than a full decomposition when `k`
/// is small.
pub fn leading_eigenpairs(a: &DMatrix<f64>, mut count: impl FnMut(&[f64]) -> Result<usize>) -> Result<SymEigen> {
    let n = a.nrows();
    if n == 0 {
        count(&[])?;
        return Ok(SymEigen { values: vec![], vectors: DMatrix::zeros(0, 0) });
    }
    let tri = Tridiagonal::new(a);
    if let Some(values) = tri.as_ref().and_then(|t| t.eigenvalues()) {
        let k = count(&values)?.min(n);
        if let Some(vectors) = tri.as_ref().and_then(|t| t.top_vectors(k)) {
            if pairs_are_accurate(a, &values, &vectors) {
                return Ok(SymEigen { values, vectors });
            }
        }
    }
    let full = sym_eigen(a);
    if full.values.iter().any(|x| x.is_nan()) {
        return Err(SipcaError::Numerical("eigendecomposition failed".into()));
    }
    let k = count(&full.values)?.min(n);
    Ok(SymEigen { vectors: full.vectors.columns(0, k).into_owned(), values: full.values })
}

/// Flips `v` so its largest-magnitude coordinate is positive (ties go to the
/// lowest index).
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if best_abs > 0.0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Orthonormal basis for the span of the columns of `a` by modified
/// Gram-Schmidt with one reorthogonalization pass. Columns whose residual
/// falls below `drop_tol` (relative to their original norm) are skipped.
pub fn orthonormal_span(a: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in 0..a.ncols() {
        let orig = a.column(c).into_owned();
        let scale = orig.norm();
        if scale == 0.0 {
            continue;
        }
        let mut v = orig;
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let nrm = v.norm();
        if nrm > drop_tol * scale {
            basis.push(v / nrm);
        }
    }
    if basis.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}
