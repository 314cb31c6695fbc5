//! Marchenko-Pastur law with unit noise variance.
//!
//! For aspect ratio `c = p / n` the continuous part lives on
//! `[(1 - sqrt c)^2, (1 + sqrt c)^2]` with density
//! `sqrt((b - x)(x - a)) / (2 pi c x)`; for `c > 1` a point mass `1 - 1/c`
//! sits at zero.

use std::f64::consts::PI;

use crate::error::{Result, SipcaError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPastur {
    ratio: f64,
    lower: f64,
    upper: f64,
}

const CDF_TOL: f64 = 1e-13;
const QUANTILE_TOL: f64 = 1e-10;

impl MarchenkoPastur {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(SipcaError::InvalidParameter(format!("aspect ratio must be positive, got {ratio}")));
        }
        let s = ratio.sqrt();
        Ok(MarchenkoPastur { ratio, lower: (1.0 - s).powi(2), upper: (1.0 + s).powi(2) })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Mass of the atom at zero.
    pub fn atom(&self) -> f64 {
        (1.0 - 1.0 / self.ratio).max(0.0)
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= self.lower || x >= self.upper || x <= 0.0 {
            return 0.0;
        }
        ((self.upper - x) * (x - self.lower)).sqrt() / (2.0 * PI * self.ratio * x)
    }

    /// `P(X <= x)`, by adaptive Simpson integration of the density after the
    /// substitution `x = a + (b - a)(1 - cos phi)/2`, which removes the
    /// square-root endpoint singularities.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x <= self.lower {
            return self.atom();
        }
        if x >= self.upper {
            return 1.0;
        }
        let half = 0.5 * (self.upper - self.lower);
        let phi_end = (1.0 - (x - self.lower) / half).clamp(-1.0, 1.0).acos();
        let integrand = |phi: f64| {
            let s = phi.sin();
            let xx = self.lower + half * (1.0 - phi.cos());
            if xx <= 0.0 {
                // c = 1 puts the lower edge at zero; the integrand's limit is finite
                return half * half * 2.0 / (half * 2.0 * PI * self.ratio);
            }
            half * half * s * s / (2.0 * PI * self.ratio * xx)
        };
        let cont = adaptive_simpson(&integrand, 0.0, phi_end, CDF_TOL, 50);
        (self.atom() + cont).clamp(0.0, 1.0)
    }

    /// Inverse CDF by bisection to `1e-10` in `x`. Levels at or below the
    /// zero atom map to zero.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(SipcaError::InvalidParameter(format!("quantile level {u} outside [0, 1]")));
        }
        if u <= self.atom() {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (self.lower, self.upper);
        while hi - lo > QUANTILE_TOL * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    // below ~1e-16 the Richardson estimate is rounding noise
    let sub = (0.5 * tol).max(1e-16);
    simpson_step(f, a, m, fa, flm, fm, left, sub, depth - 1) + simpson_step(f, m, b, fm, frm, fb, right, sub, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Brute-force midpoint rule directly in x, independent of the
    // substitution used by `cdf`.
    fn midpoint_cdf(mp: &MarchenkoPastur, x: f64) -> f64 {
        let (a, _) = mp.support();
        let n = 2_000_000;
        let h = (x - a) / n as f64;
        let s: f64 = (0..n).map(|i| mp.density(a + (i as f64 + 0.5) * h)).sum();
        mp.atom() + s * h
    }

    #[test]
    fn quadrature_matches_midpoint_rule() {
        for &c in &[0.05, 0.5, 2.0] {
            let mp = MarchenkoPastur::new(c).unwrap();
            let (a, b) = mp.support();
            for i in [1, 5, 10, 15, 19] {
                let x = a + (b - a) * i as f64 / 20.0;
                let d = (mp.cdf(x) - midpoint_cdf(&mp, x)).abs();
                assert!(d < 1e-7, "c={c} x={x} diff={d}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &c in &[0.05, 0.5, 1.0, 2.0, 5.0] {
            let mp = MarchenkoPastur::new(c).unwrap();
            for k in 1..10 {
                let u = k as f64 / 10.0;
                if u <= mp.atom() {
                    continue;
                }
                let q = mp.quantile(u).unwrap();
                assert!((mp.cdf(q) - u).abs() < 1e-8, "c={c} u={u}");
            }
        }
    }

    #[test]
    fn total_mass_and_atom() {
        let mp = MarchenkoPastur::new(4.0).unwrap();
        assert!((mp.atom() - 0.75).abs() < 1e-15);
        let (_, b) = mp.support();
        assert!((mp.cdf(b * (1.0 - 1e-12)) - 1.0).abs() < 1e-8);
        assert_eq!(mp.quantile(0.5).unwrap(), 0.0);
        assert!(MarchenkoPastur::new(0.0).is_err());
    }
}
