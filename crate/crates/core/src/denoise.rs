//! Sample covariance, per-view noise variance estimation and the denoised
//! covariance `S = Sigma_hat - blockdiag(sigma_1^2 I, ..., sigma_I^2 I)`.
//!
//! Noise variances come from bulk eigenvalue matching: the middle part of a
//! view's sample spectrum is fitted, by least squares, to `sigma^2` times
//! the matching Marchenko-Pastur quantiles. This is the bulk-matching core
//! only; there is no spike-count correction, so spikes must fall outside
//! the bulk window (true for a fixed number of spikes and the default
//! `[0.25, 0.75]` window).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmat::{symmetrize_in_place, BlockLayout, SymBlockMatrix};
use crate::error::{Result, SipcaError};
use crate::linalg::sym_eigenvalues;
use crate::mp::MarchenkoPastur;

/// Bulk window, as quantile ranks of the nonzero sample eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BemaConfig {
    pub q_lo: f64,
    pub q_hi: f64,
}

impl Default for BemaConfig {
    fn default() -> Self {
        BemaConfig { q_lo: 0.25, q_hi: 0.75 }
    }
}

/// Where the per-view noise variances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum NoiseSource {
    Bema(BemaConfig),
    /// No denoising: `S = Sigma_hat`.
    Zero,
    /// User-supplied `sigma_i^2`, one per view.
    Fixed(Vec<f64>),
}

impl Default for NoiseSource {
    fn default() -> Self {
        NoiseSource::Bema(BemaConfig::default())
    }
}

#[derive(Debug, Clone)]
pub struct DenoisedCovariance {
    pub s: SymBlockMatrix,
    pub sigma2_hat: Vec<f64>,
    pub sample_cov: SymBlockMatrix,
    pub n: usize,
}

impl DenoisedCovariance {
    /// `S + blockdiag(sigma_i^2 I)`.
    pub fn restore_sample_cov(&self) -> SymBlockMatrix {
        let layout = self.s.layout();
        let mut m = self.s.matrix().clone();
        for (k, &s2) in self.sigma2_hat.iter().enumerate() {
            for i in layout.range(k) {
                m[(i, i)] += s2;
            }
        }
        SymBlockMatrix::from_symmetric_unchecked(layout.clone(), m)
    }
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mu = column_means(x);
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mu[j]);
    }
    xc
}

/// `(1/n) sum_i (x_i - xbar)(x_i - xbar)^T` for an `n x p` data matrix.
pub fn sample_covariance(x: &DMatrix<f64>, layout: &BlockLayout) -> Result<SymBlockMatrix> {
    if x.nrows() < 2 {
        return Err(SipcaError::TooFewSamples { needed: 2, got: x.nrows() });
    }
    if x.ncols() != layout.dim() {
        return Err(SipcaError::Dimension(format!("data has {} columns, layout has {}", x.ncols(), layout.dim())));
    }
    let xc = centered(x);
    let mut cov = xc.tr_mul(&xc) / x.nrows() as f64;
    symmetrize_in_place(&mut cov);
    Ok(SymBlockMatrix::from_symmetric_unchecked(layout.clone(), cov))
}

/// Nonzero-part spectrum of one view's sample covariance, ascending,
/// computed from whichever Gram matrix is smaller.
fn view_spectrum(xc: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = xc.shape();
    let gram = if p <= n { xc.tr_mul(xc) } else { xc * xc.transpose() };
    let mut g = gram / n as f64;
    symmetrize_in_place(&mut g);
    let mut vals = sym_eigenvalues(&g);
    vals.reverse();
    vals
}

/// Noise variance of one view (`n x p_i` data) by bulk eigenvalue matching.
pub fn bema_sigma2(x_view: &DMatrix<f64>, cfg: &BemaConfig) -> Result<f64> {
    let (n, p) = x_view.shape();
    if n < 2 {
        return Err(SipcaError::TooFewSamples { needed: 2, got: n });
    }
    if p < 2 {
        return Err(SipcaError::InvalidParameter(format!("bulk matching needs at least 2 coordinates per view, got {p}")));
    }
    if !(0.0 <= cfg.q_lo && cfg.q_lo < cfg.q_hi && cfg.q_hi <= 1.0) {
        return Err(SipcaError::InvalidParameter(format!("bad bulk window [{}, {}]", cfg.q_lo, cfg.q_hi)));
    }
    let eigs = view_spectrum(&centered(x_view));
    let m = eigs.len();
    let law = MarchenkoPastur::new(p as f64 / n as f64)?;

    let (mut num, mut den) = (0.0, 0.0);
    let mut used = 0;
    for (k, &lam) in eigs.iter().enumerate() {
        let rank = (k as f64 + 0.5) / m as f64;
        if rank < cfg.q_lo || rank > cfg.q_hi {
            continue;
        }
        // when p > n the p - m zero eigenvalues sit below the observed ones
        let level = ((p - m) as f64 + k as f64 + 0.5) / p as f64;
        let q = law.quantile(level)?;
        num += lam * q;
        den += q * q;
        used += 1;
    }
    if used == 0 || den == 0.0 {
        return Err(SipcaError::EmptyBulk { lo: cfg.q_lo, hi: cfg.q_hi });
    }
    Ok((num / den).max(0.0))
}

/// `a - b`, nudged by at most a few ulps so that adding `b` back returns `a`
/// exactly whenever some representable difference allows it.
fn invertible_difference(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d + b == a {
        return d;
    }
    let mut up = d;
    let mut down = d;
    for _ in 0..4 {
        up = up.next_up();
        down = down.next_down();
        if up + b == a {
            return up;
        }
        if down + b == a {
            return down;
        }
    }
    d
}

pub fn denoise(x: &DMatrix<f64>, layout: &BlockLayout, source: &NoiseSource) -> Result<DenoisedCovariance> {
    let sample_cov = sample_covariance(x, layout)?;
    let nv = layout.num_views();
    let sigma2_hat: Vec<f64> = match source {
        NoiseSource::Zero => vec![0.0; nv],
        NoiseSource::Fixed(v) => {
            if v.len() != nv {
                return Err(SipcaError::Dimension(format!("{} noise variances for {nv} views", v.len())));
            }
            if let Some(bad) = v.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
                return Err(SipcaError::InvalidParameter(format!("noise variance {bad} is not a nonnegative number")));
            }
            v.clone()
        }
        NoiseSource::Bema(cfg) => (0..nv)
            .into_par_iter()
            .map(|k| {
                let r = layout.range(k);
                let xv = x.columns(r.start, r.len()).into_owned();
                bema_sigma2(&xv, cfg)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let mut s = sample_cov.matrix().clone();
    for (k, &s2) in sigma2_hat.iter().enumerate() {
        for i in layout.range(k) {
            s[(i, i)] = invertible_difference(s[(i, i)], s2);
        }
    }
    Ok(DenoisedCovariance {
        s: SymBlockMatrix::from_symmetric_unchecked(layout.clone(), s),
        sigma2_hat,
        sample_cov,
        n: x.nrows(),
    })
}
