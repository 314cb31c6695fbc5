// Independent reference solvers shared by the integration and acceptance
// tests. None of them calls the water-filling, prox or ADMM code under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use sipca::{BlockLayout, WeightMatrix};

pub fn random_symmetric<R: Rng>(p: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-scale..scale));
    (&a + a.transpose()) * 0.5
}

pub fn random_layout<R: Rng>(p: usize, views: usize, rng: &mut R) -> BlockLayout {
    // random composition of p into `views` positive parts
    let mut cuts: Vec<usize> = (1..p).collect();
    for i in 0..cuts.len() {
        let j = rng.random_range(i..cuts.len());
        cuts.swap(i, j);
    }
    let mut chosen: Vec<usize> = cuts[..views - 1].to_vec();
    chosen.sort_unstable();
    let mut sizes = Vec::with_capacity(views);
    let mut prev = 0;
    for c in chosen.into_iter().chain(std::iter::once(p)) {
        sizes.push(c - prev);
        prev = c;
    }
    BlockLayout::new(sizes).unwrap()
}

/// Eigenvalues of `x` clipped to `[0, 1]`.
fn clip_spectrum(x: &DMatrix<f64>) -> DMatrix<f64> {
    let e = x.clone().symmetric_eigen();
    let d = e.eigenvalues.map(|l| l.clamp(0.0, 1.0));
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// Euclidean projection onto `{tr X = 1, Pi X = X Pi = 0}`. For PSD `X`,
/// `<X, Pi> = 0` already forces `Pi X = 0`, and this form of the constraint
/// keeps the alternating projections from crawling along the PSD boundary.
fn affine_project(x: &DMatrix<f64>, pi: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let p = x.nrows();
    let id = DMatrix::<f64>::identity(p, p);
    match pi {
        None => x - &id * ((x.trace() - 1.0) / p as f64),
        Some(pm) => {
            let q = &id - pm;
            let y = &q * x * &q;
            let free = p as f64 - pm.trace();
            &y - &q * ((y.trace() - 1.0) / free)
        }
    }
}

/// Nearest point of `{0 <= X <= I, tr X = 1, <X, Pi> = 0}` to `a` by
/// Dykstra's alternating projections.
pub fn dykstra_fantope(a: &DMatrix<f64>, pi: Option<&DMatrix<f64>>, max_iter: usize) -> DMatrix<f64> {
    let mut x = a.clone();
    let mut corr = DMatrix::zeros(a.nrows(), a.ncols());
    for _ in 0..max_iter {
        let y = clip_spectrum(&(&x + &corr));
        corr = &x + &corr - &y;
        let next = affine_project(&y, pi);
        // x can stall for a few sweeps while the correction still moves
        let step = (&next - &x).norm() + (&next - &y).norm();
        x = next;
        if step < 1e-14 {
            break;
        }
    }
    x
}

/// Prox of `l1 ||X||_1 + group sum_kl w_kl ||X^kl||_F` at `a`, from the
/// dual: `X = A - Z1 - Z2` with `(Z1, Z2)` the nearest point to `A` in the
/// sum of the scaled dual-norm balls, found by alternating minimization.
pub fn prox_dual_oracle(a: &DMatrix<f64>, layout: &BlockLayout, l1: f64, group: f64, w: &WeightMatrix, max_iter: usize) -> DMatrix<f64> {
    let p = a.nrows();
    let mut z1 = DMatrix::zeros(p, p);
    let mut z2 = DMatrix::zeros(p, p);
    for _ in 0..max_iter {
        let r1 = a - &z2;
        let new_z1 = r1.map(|v| v.clamp(-l1, l1));
        let r2 = a - &new_z1;
        let mut new_z2 = r2.clone();
        for k in 0..layout.num_views() {
            for l in 0..layout.num_views() {
                let (rk, rl) = (layout.range(k), layout.range(l));
                let radius = group * w.get(k, l);
                let mut blk = new_z2.view_mut((rk.start, rl.start), (rk.len(), rl.len()));
                let nrm = blk.norm();
                if nrm > radius {
                    blk.scale_mut(radius / nrm);
                }
            }
        }
        let change = (&new_z1 - &z1).norm() + (&new_z2 - &z2).norm();
        z1 = new_z1;
        z2 = new_z2;
        if change < 1e-16 {
            break;
        }
    }
    a - z1 - z2
}

/// The prox objective, written out independently of the library.
pub fn prox_objective(x: &DMatrix<f64>, a: &DMatrix<f64>, layout: &BlockLayout, l1: f64, group: f64, w: &WeightMatrix) -> f64 {
    let mut g = 0.0;
    for k in 0..layout.num_views() {
        for l in 0..layout.num_views() {
            let (rk, rl) = (layout.range(k), layout.range(l));
            g += w.get(k, l) * x.view((rk.start, rl.start), (rk.len(), rl.len())).norm();
        }
    }
    0.5 * (x - a).norm_squared() + l1 * x.iter().map(|v| v.abs()).sum::<f64>() + group * g
}

/// Leading eigenvector of a symmetric matrix by shifted power iteration.
pub fn power_iteration(a: &DMatrix<f64>, max_iter: usize) -> DVector<f64> {
    let p = a.nrows();
    let shifted = a + DMatrix::<f64>::identity(p, p) * a.norm();
    let mut v = DVector::from_fn(p, |i, _| 1.0 + 0.1 * i as f64);
    v.normalize_mut();
    for _ in 0..max_iter {
        let mut next = &shifted * &v;
        next.normalize_mut();
        if next.dot(&v) < 0.0 {
            next.neg_mut();
        }
        let step = (&next - &v).norm();
        v = next;
        if step < 1e-15 {
            break;
        }
    }
    v
}

/// Angle between the lines spanned by two unit vectors.
pub fn line_angle(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let c = u.dot(v).abs().min(1.0);
    // acos loses precision near 1; the sine form does not
    let s = (u - v * u.dot(v)).norm();
    s.atan2(c)
}

/// Symmetric matrix with prescribed spectrum in a random orthonormal basis.
pub fn with_spectrum<R: Rng>(values: &[f64], rng: &mut R) -> DMatrix<f64> {
    let p = values.len();
    let g = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let m = &q * DMatrix::from_diagonal(&DVector::from_column_slice(values)) * q.transpose();
    (&m + m.transpose()) * 0.5
}
