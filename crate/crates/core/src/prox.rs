//! Proximal operator of the combined elementwise-lasso and blockwise
//! group-lasso penalty.
//!
//! For `min_X 1/2 ||X - A||^2 + l1 ||X||_{1,1} + group * sum_kl w_kl ||X^{kl}||`
//! the groups (blocks) are unions of the lasso's singleton groups, so the
//! minimizer is obtained by soft-thresholding first and then shrinking each
//! block as a whole.

use crate::blockmat::{SymBlockMatrix, WeightMatrix};
use crate::error::{Result, SipcaError};

#[inline]
pub fn soft_threshold_scalar(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Entrywise `sgn(x)(|x| - t)_+`.
pub fn soft_threshold(a: &SymBlockMatrix, t: f64) -> Result<SymBlockMatrix> {
    check_nonneg("threshold", t)?;
    let m = a.matrix().map(|x| soft_threshold_scalar(x, t));
    Ok(SymBlockMatrix::from_symmetric_unchecked(a.layout().clone(), m))
}

pub fn hierarchical_prox(a: &SymBlockMatrix, l1: f64, group: f64, w: &WeightMatrix) -> Result<SymBlockMatrix> {
    check_nonneg("l1 level", l1)?;
    check_nonneg("group level", group)?;
    let layout = a.layout();
    layout.ensure_same(w.layout())?;

    let mut m = a.matrix().map(|x| soft_threshold_scalar(x, l1));
    if group == 0.0 {
        return Ok(SymBlockMatrix::from_symmetric_unchecked(layout.clone(), m));
    }
    let nv = layout.num_views();
    for k in 0..nv {
        for l in k..nv {
            let (rk, rl) = (layout.range(k), layout.range(l));
            let shape = (rk.len(), rl.len());
            // the (l, k) block is the exact transpose, so one norm serves both
            let nrm = m.view((rk.start, rl.start), shape).norm();
            let factor = if nrm == 0.0 { 0.0 } else { (1.0 - group * w.get(k, l) / nrm).max(0.0) };
            if factor == 1.0 {
                continue;
            }
            m.view_mut((rk.start, rl.start), shape).scale_mut(factor);
            if k != l {
                m.view_mut((rl.start, rk.start), (shape.1, shape.0)).scale_mut(factor);
            }
        }
    }
    Ok(SymBlockMatrix::from_symmetric_unchecked(layout.clone(), m))
}

/// `1/2 ||X - A||^2 + l1 ||X||_{1,1} + group ||X||*_{1,1}`
pub fn prox_objective(x: &SymBlockMatrix, a: &SymBlockMatrix, l1: f64, group: f64, w: &WeightMatrix) -> Result<f64> {
    let d = x.sub(a).frobenius();
    Ok(0.5 * d * d + l1 * x.norm_l11() + group * x.norm_group(w)?)
}

/// Max-entry residual of the optimality condition
/// `0 in X - A + l1 * d||X||_{1,1} + group * d||X||*_{1,1}`, with the
/// subgradients chosen explicitly: `w_kl X^{kl} / ||X^{kl}||` on nonzero
/// blocks; on zero blocks the scaled block residual clamped to the unit ball.
/// Inside a nonzero block, zero entries take the lasso subgradient that best
/// cancels the residual, clamped to `[-1, 1]`.
pub fn kkt_residual(x: &SymBlockMatrix, a: &SymBlockMatrix, l1: f64, group: f64, w: &WeightMatrix) -> Result<f64> {
    let layout = x.layout();
    layout.ensure_same(a.layout())?;
    layout.ensure_same(w.layout())?;
    let nv = layout.num_views();
    let mut worst: f64 = 0.0;
    for k in 0..nv {
        for l in 0..nv {
            let xb = x.block(k, l);
            let ab = a.block(k, l);
            let nrm = xb.norm();
            let (rows, cols) = xb.shape();
            if nrm > 0.0 {
                let gw = group * w.get(k, l) / nrm;
                for c in 0..cols {
                    for r in 0..rows {
                        let xv = xb[(r, c)];
                        let base = xv - ab[(r, c)] + gw * xv;
                        let res = if xv != 0.0 {
                            base + l1 * xv.signum()
                        } else if l1 > 0.0 {
                            base + l1 * (-base / l1).clamp(-1.0, 1.0)
                        } else {
                            base
                        };
                        worst = worst.max(res.abs());
                    }
                }
            } else {
                // X^{kl} = 0: residual -A + l1*g1 + group*w*g2, with g1 the clamped
                // lasso subgradient and g2 in the unit Frobenius ball.
                let mut rem = ab.map(|av| {
                    if l1 > 0.0 {
                        -av + l1 * (av / l1).clamp(-1.0, 1.0)
                    } else {
                        -av
                    }
                });
                let rn = rem.norm();
                let cap = group * w.get(k, l);
                if rn > 0.0 && cap > 0.0 {
                    let take = (cap / rn).min(1.0);
                    rem *= 1.0 - take;
                }
                worst = worst.max(rem.amax());
            }
        }
    }
    Ok(worst)
}

fn check_nonneg(what: &str, t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SipcaError::InvalidParameter(format!("{what} must be a finite nonnegative number, got {t}")));
    }
    Ok(())
}
