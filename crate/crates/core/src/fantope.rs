//! Euclidean projection onto the Fantope of degree one,
//! `F = {H : 0 <= H <= I, tr H = 1}`, and onto its deflated version
//! `{H in F : <H, Pi> = 0}` for an orthogonal projector `Pi`.

use nalgebra::{DMatrix, DVector};

use crate::blockmat::{symmetrize_in_place, BlockLayout, SymBlockMatrix};
use crate::error::{Result, SipcaError};
use crate::linalg::{fix_sign, leading_eigenpairs, sym_eigen};

/// Orthogonality tolerance for projector bases.
pub const BASIS_TOL: f64 = 1e-10;

/// Orthogonal projector `Pi = V V^T` onto the span of previously estimated
/// eigenvectors, together with a basis of its orthogonal complement.
#[derive(Debug, Clone)]
pub struct Projector {
    layout: BlockLayout,
    basis: DMatrix<f64>,
    pi: SymBlockMatrix,
    // None when the projector has rank 0.
    complement: Option<DMatrix<f64>>,
}

impl Projector {
    /// The rank-0 projector.
    pub fn empty(layout: &BlockLayout) -> Self {
        Projector {
            layout: layout.clone(),
            basis: DMatrix::zeros(layout.dim(), 0),
            pi: SymBlockMatrix::zeros(layout),
            complement: None,
        }
    }

    /// Builds `V V^T` from orthonormal columns `basis`.
    pub fn from_basis(layout: &BlockLayout, basis: DMatrix<f64>) -> Result<Self> {
        let p = layout.dim();
        if basis.nrows() != p {
            return Err(SipcaError::Dimension(format!("basis has {} rows, expected {p}", basis.nrows())));
        }
        let d = basis.ncols();
        if d == 0 {
            return Ok(Self::empty(layout));
        }
        if d >= p {
            return Err(SipcaError::InvalidParameter(format!(
                "projector rank {d} leaves no complement in dimension {p}"
            )));
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::identity(d, d)).amax();
        if err > BASIS_TOL {
            return Err(SipcaError::InvalidParameter(format!("basis is not orthonormal (error {err:e})")));
        }
        let pi = SymBlockMatrix::from_outer_products(layout, &basis, &vec![1.0; d])?;
        let complement = complement_basis(&pi, d)?;
        Ok(Projector { layout: layout.clone(), basis, pi, complement: Some(complement) })
    }

    /// `Pi + v v^T`.
    pub fn extend(&self, v: &DVector<f64>) -> Result<Self> {
        let mut cols: Vec<DVector<f64>> = self.basis.column_iter().map(|c| c.into_owned()).collect();
        cols.push(v.clone());
        Self::from_basis(&self.layout, DMatrix::from_columns(&cols))
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn matrix(&self) -> &SymBlockMatrix {
        &self.pi
    }

    /// Orthonormal basis `U` of the complement, `p x (p - d)`; `None` for rank 0.
    pub fn complement(&self) -> Option<&DMatrix<f64>> {
        self.complement.as_ref()
    }

    /// `(I - Pi) A (I - Pi)`.
    pub fn deflate(&self, a: &SymBlockMatrix) -> SymBlockMatrix {
        match &self.complement {
            None => a.clone(),
            Some(u) => {
                let q = u * u.transpose();
                let mut m = &q * a.matrix() * &q;
                symmetrize_in_place(&mut m);
                SymBlockMatrix::from_symmetric_unchecked(self.layout.clone(), m)
            }
        }
    }
}

// Eigenvectors of I - Pi with eigenvalue above one half.
fn complement_basis(pi: &SymBlockMatrix, d: usize) -> Result<DMatrix<f64>> {
    let p = pi.dim();
    let eye_minus = DMatrix::<f64>::identity(p, p) - pi.matrix();
    let eig = sym_eigen(&eye_minus);
    let keep = eig.values.iter().take_while(|&&g| g > 0.5).count();
    if keep != p - d {
        return Err(SipcaError::Numerical(format!(
            "complement has {keep} directions, expected {}",
            p - d
        )));
    }
    Ok(eig.vectors.columns(0, keep).into_owned())
}

/// Shift `theta` and clipped weights `min(max(g - theta, 0), 1)` summing to one.
///
/// `values` need not be sorted. The clipped sum is piecewise linear in
/// theta with breakpoints at `g` and `g - 1`, so the crossing is located
/// exactly by scanning breakpoints; bisection is the fallback.
pub fn water_fill(values: &[f64]) -> Result<(f64, Vec<f64>)> {
    if values.is_empty() {
        return Err(SipcaError::Numerical("cannot water-fill an empty spectrum".into()));
    }
    if values.iter().any(|g| !g.is_finite()) {
        return Err(SipcaError::Numerical("non-finite eigenvalue".into()));
    }
    let clipped_sum = |theta: f64| -> f64 { values.iter().map(|&g| (g - theta).clamp(0.0, 1.0)).sum() };

    let mut breaks: Vec<f64> = values.iter().flat_map(|&g| [g, g - 1.0]).collect();
    breaks.sort_by(|a, b| b.total_cmp(a));
    breaks.dedup();
    // g - (g - 1) can round below 1; one unit further down every weight is exactly 1
    breaks.push(breaks[breaks.len() - 1] - 1.0);

    // clipped_sum is 0 at the largest breakpoint and len() >= 1 at the smallest.
    let mut theta = None;
    for w in breaks.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        let (f_hi, f_lo) = (clipped_sum(hi), clipped_sum(lo));
        if f_hi <= 1.0 && f_lo >= 1.0 {
            theta = Some(if f_lo == f_hi { hi } else { hi - (1.0 - f_hi) * (hi - lo) / (f_lo - f_hi) });
            break;
        }
    }
    let theta = match theta {
        Some(t) if (clipped_sum(t) - 1.0).abs() <= 1e-12 * values.len() as f64 => t,
        _ => bisect_theta(&clipped_sum, &breaks)?,
    };
    let weights = values.iter().map(|&g| (g - theta).clamp(0.0, 1.0)).collect();
    Ok((theta, weights))
}

fn bisect_theta(f: &dyn Fn(f64) -> f64, breaks: &[f64]) -> Result<f64> {
    let mut hi = breaks[0];
    let mut lo = *breaks.last().unwrap();
    if !(f(lo) >= 1.0) {
        return Err(SipcaError::Numerical("water-filling bracket does not contain the root".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (hi + lo);
        if f(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (hi + lo))
}

/// `sum_j c_j q_j q_j^T` over columns of `vectors` with nonzero `c_j`.
fn spectral_sum(vectors: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let active: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] != 0.0).collect();
    let n = vectors.nrows();
    let mut scaled = DMatrix::zeros(n, active.len());
    let mut plain = DMatrix::zeros(n, active.len());
    for (c, &j) in active.iter().enumerate() {
        plain.set_column(c, &vectors.column(j));
        scaled.set_column(c, &(vectors.column(j) * weights[j]));
    }
    let mut m = scaled * plain.transpose();
    symmetrize_in_place(&mut m);
    m
}

// Water-filled weights of the spectrum of `m` with their eigenvectors.
// Eigenvectors are computed only for the eigenvalues with positive weight.
fn water_filled(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut weights = Vec::new();
    let eig = leading_eigenpairs(m, |values| {
        weights = water_fill(values)?.1;
        Ok(weights.iter().take_while(|&&c| c > 0.0).count())
    })?;
    weights.truncate(eig.vectors.ncols());
    Ok((eig.vectors, weights))
}

/// Nearest point of the Fantope to `a` in Frobenius norm.
pub fn fantope_project(a: &SymBlockMatrix) -> Result<SymBlockMatrix> {
    let (vectors, weights) = water_filled(a.matrix())?;
    Ok(SymBlockMatrix::from_symmetric_unchecked(a.layout().clone(), spectral_sum(&vectors, &weights)))
}

/// Nearest point of the deflated Fantope `{H in F : <H, Pi> = 0}` to `a`.
pub fn deflated_fantope_project(a: &SymBlockMatrix, pi: &Projector) -> Result<SymBlockMatrix> {
    a.layout().ensure_same(pi.layout())?;
    let u = match pi.complement() {
        None => return fantope_project(a),
        Some(u) => u,
    };
    let mut reduced = u.transpose() * a.matrix() * u;
    symmetrize_in_place(&mut reduced);
    let (vectors, weights) = water_filled(&reduced)?;
    let lifted = u * vectors;
    Ok(SymBlockMatrix::from_symmetric_unchecked(a.layout().clone(), spectral_sum(&lifted, &weights)))
}

/// Unit eigenvector of the largest eigenvalue of `h`, sign-normalized so the
/// largest-magnitude coordinate is positive.
pub fn leading_eigvec(h: &SymBlockMatrix) -> DVector<f64> {
    let eig = sym_eigen(h.matrix());
    let mut v = eig.vectors.column(0).into_owned();
    v.normalize_mut();
    fix_sign(&mut v);
    v
}
