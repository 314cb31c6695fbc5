//! Block-structured symmetric matrices.
//!
//! A [`BlockLayout`] partitions `p` coordinates into `I` contiguous views.
//! [`SymBlockMatrix`] is a dense symmetric `p x p` matrix that can be
//! addressed by `(view, view)` sub-blocks, and [`WeightMatrix`] holds the
//! per-block weights of the group penalty.

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SipcaError};

/// Relative symmetry tolerance applied to externally supplied matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    sizes: Vec<usize>,
}

impl TryFrom<LayoutRepr> for BlockLayout {
    type Error = SipcaError;
    fn try_from(r: LayoutRepr) -> Result<Self> {
        BlockLayout::new(r.sizes)
    }
}

impl From<BlockLayout> for LayoutRepr {
    fn from(l: BlockLayout) -> Self {
        LayoutRepr { sizes: l.sizes }
    }
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(SipcaError::InvalidLayout("at least one view is required".into()));
        }
        if let Some(k) = sizes.iter().position(|&s| s == 0) {
            return Err(SipcaError::InvalidLayout(format!("view {k} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(BlockLayout { sizes, offsets })
    }

    /// `views` blocks of `block_size` coordinates each.
    pub fn uniform(views: usize, block_size: usize) -> Result<Self> {
        Self::new(vec![block_size; views])
    }

    /// A single view covering all `p` coordinates.
    pub fn single(p: usize) -> Result<Self> {
        Self::new(vec![p])
    }

    pub fn num_views(&self) -> usize {
        self.sizes.len()
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, view: usize) -> usize {
        self.sizes[view]
    }

    pub fn offset(&self, view: usize) -> usize {
        self.offsets[view]
    }

    /// Coordinate range of `view`.
    pub fn range(&self, view: usize) -> std::ops::Range<usize> {
        self.offsets[view]..self.offsets[view + 1]
    }

    /// View that owns coordinate `coord`. Panics if `coord >= dim()`.
    pub fn view_of(&self, coord: usize) -> usize {
        assert!(coord < self.dim(), "coordinate {coord} out of range");
        // offsets is strictly increasing; find the last offset <= coord
        self.offsets.partition_point(|&o| o <= coord) - 1
    }

    pub(crate) fn ensure_same(&self, other: &BlockLayout) -> Result<()> {
        if self != other {
            return Err(SipcaError::LayoutMismatch {
                expected: self.sizes.clone(),
                found: other.sizes.clone(),
            });
        }
        Ok(())
    }
}

/// Dense symmetric matrix with a view partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBlockMatrix {
    layout: BlockLayout,
    entries: DMatrix<f64>,
}

impl SymBlockMatrix {
    /// Wraps `entries`, rejecting matrices that are not symmetric to
    /// `SYMMETRY_TOL * (1 + |A_st|)`. The lower triangle is mirrored into the
    /// upper one so the stored matrix is exactly symmetric.
    pub fn new(layout: BlockLayout, mut entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&layout, &entries)?;
        let p = layout.dim();
        for c in 0..p {
            for r in (c + 1)..p {
                let a = entries[(r, c)];
                let b = entries[(c, r)];
                let gap = (a - b).abs();
                if !(gap <= SYMMETRY_TOL * (1.0 + a.abs())) {
                    return Err(SipcaError::NotSymmetric { row: r, col: c, gap });
                }
                entries[(c, r)] = a;
            }
        }
        Ok(SymBlockMatrix { layout, entries })
    }

    /// Symmetrizes `(A + A^T) / 2`; the entry point for external data.
    pub fn symmetrized(layout: BlockLayout, entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&layout, &entries)?;
        let mut entries = entries;
        symmetrize_in_place(&mut entries);
        Ok(SymBlockMatrix { layout, entries })
    }

    /// Caller guarantees exact symmetry.
    pub(crate) fn from_symmetric_unchecked(layout: BlockLayout, entries: DMatrix<f64>) -> Self {
        debug_assert_eq!(entries.nrows(), layout.dim());
        SymBlockMatrix { layout, entries }
    }

    pub fn zeros(layout: &BlockLayout) -> Self {
        let p = layout.dim();
        SymBlockMatrix { layout: layout.clone(), entries: DMatrix::zeros(p, p) }
    }

    pub fn identity(layout: &BlockLayout) -> Self {
        let p = layout.dim();
        SymBlockMatrix { layout: layout.clone(), entries: DMatrix::identity(p, p) }
    }

    /// `sum_j weights[j] * v_j v_j^T` for the columns of `vectors`.
    pub fn from_outer_products(
        layout: &BlockLayout,
        vectors: &DMatrix<f64>,
        weights: &[f64],
    ) -> Result<Self> {
        if vectors.nrows() != layout.dim() || vectors.ncols() != weights.len() {
            return Err(SipcaError::Dimension(format!(
                "expected {} x {} vectors, got {} x {}",
                layout.dim(),
                weights.len(),
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        let mut scaled = vectors.clone();
        for (j, &w) in weights.iter().enumerate() {
            scaled.column_mut(j).scale_mut(w);
        }
        let mut m = &scaled * vectors.transpose();
        symmetrize_in_place(&mut m);
        Ok(SymBlockMatrix::from_symmetric_unchecked(layout.clone(), m))
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    /// The `(k, l)` sub-block, `p_k x p_l`.
    pub fn block(&self, k: usize, l: usize) -> DMatrixView<'_, f64> {
        let (r0, c0) = (self.layout.offset(k), self.layout.offset(l));
        self.entries.view((r0, c0), (self.layout.size(k), self.layout.size(l)))
    }

    /// Reassembles a matrix from its `(k, l)` blocks, the inverse of [`Self::block`].
    pub fn from_blocks(layout: &BlockLayout, blocks: &[Vec<DMatrix<f64>>]) -> Result<Self> {
        let nv = layout.num_views();
        if blocks.len() != nv || blocks.iter().any(|row| row.len() != nv) {
            return Err(SipcaError::Dimension(format!("expected {nv} x {nv} blocks")));
        }
        let p = layout.dim();
        let mut m = DMatrix::zeros(p, p);
        for k in 0..nv {
            for l in 0..nv {
                let b = &blocks[k][l];
                if b.shape() != (layout.size(k), layout.size(l)) {
                    return Err(SipcaError::Dimension(format!("block ({k},{l}) has wrong shape")));
                }
                m.view_mut((layout.offset(k), layout.offset(l)), b.shape()).copy_from(b);
            }
        }
        Self::new(layout.clone(), m)
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Frobenius inner product `<A, B> = tr(A B^T)`.
    pub fn dot(&self, other: &SymBlockMatrix) -> f64 {
        self.entries.dot(&other.entries)
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.norm()
    }

    pub fn scale(&self, c: f64) -> SymBlockMatrix {
        SymBlockMatrix::from_symmetric_unchecked(self.layout.clone(), &self.entries * c)
    }

    pub fn add(&self, other: &SymBlockMatrix) -> SymBlockMatrix {
        SymBlockMatrix::from_symmetric_unchecked(self.layout.clone(), &self.entries + &other.entries)
    }

    pub fn sub(&self, other: &SymBlockMatrix) -> SymBlockMatrix {
        SymBlockMatrix::from_symmetric_unchecked(self.layout.clone(), &self.entries - &other.entries)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &SymBlockMatrix) -> SymBlockMatrix {
        let mut m = self.entries.clone();
        m.zip_apply(&other.entries, |a, b| *a += c * b);
        SymBlockMatrix::from_symmetric_unchecked(self.layout.clone(), m)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }

    pub fn has_non_finite(&self) -> bool {
        self.entries.iter().any(|x| !x.is_finite())
    }

    /// Largest `|A_st - A_ts|`.
    pub fn asymmetry(&self) -> f64 {
        let p = self.dim();
        let mut worst: f64 = 0.0;
        for c in 0..p {
            for r in (c + 1)..p {
                worst = worst.max((self.entries[(r, c)] - self.entries[(c, r)]).abs());
            }
        }
        worst
    }

    /// Entrywise `|A_st| < floor` set to exactly zero.
    pub fn floor_small(&self, floor: f64) -> SymBlockMatrix {
        let m = self.entries.map(|x| if x.abs() < floor { 0.0 } else { x });
        SymBlockMatrix::from_symmetric_unchecked(self.layout.clone(), m)
    }

    /// `sum_{s,t} |A_st|`
    pub fn norm_l11(&self) -> f64 {
        self.entries.iter().map(|x| x.abs()).sum()
    }

    /// `max_{s,t} |A_st|`
    pub fn norm_linf(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Group penalty `sum_{k,l} w_kl ||A^{kl}||_F`.
    pub fn norm_group(&self, w: &WeightMatrix) -> Result<f64> {
        self.layout.ensure_same(&w.layout)?;
        let nv = self.layout.num_views();
        let mut total = 0.0;
        for k in 0..nv {
            for l in 0..nv {
                total += w.get(k, l) * self.block(k, l).norm();
            }
        }
        Ok(total)
    }

    /// Dual of the group penalty: `max_{k,l} ||A^{kl}||_F / w_kl`.
    pub fn norm_linf_star(&self, w: &WeightMatrix) -> Result<f64> {
        self.layout.ensure_same(&w.layout)?;
        let nv = self.layout.num_views();
        let mut worst: f64 = 0.0;
        for k in 0..nv {
            for l in 0..nv {
                worst = worst.max(self.block(k, l).norm() / w.get(k, l));
            }
        }
        Ok(worst)
    }
}

/// Free-function forms of the four penalty norms.
pub fn norm_l11(a: &SymBlockMatrix) -> f64 {
    a.norm_l11()
}

pub fn norm_group(a: &SymBlockMatrix, w: &WeightMatrix) -> Result<f64> {
    a.norm_group(w)
}

pub fn norm_linf(a: &SymBlockMatrix) -> f64 {
    a.norm_linf()
}

pub fn norm_linf_star(a: &SymBlockMatrix, w: &WeightMatrix) -> Result<f64> {
    a.norm_linf_star(w)
}

fn check_shape(layout: &BlockLayout, m: &DMatrix<f64>) -> Result<()> {
    let p = layout.dim();
    if m.nrows() != p || m.ncols() != p {
        return Err(SipcaError::Dimension(format!(
            "layout has p = {p} but matrix is {} x {}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `(A + A^T) / 2`, written so the result is bit-exactly symmetric.
pub(crate) fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for c in 0..p {
        for r in (c + 1)..p {
            let avg = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = avg;
            m[(c, r)] = avg;
        }
    }
}

/// Symmetric positive weights `w_kl` of the group penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    layout: BlockLayout,
    w: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(layout: BlockLayout, w: DMatrix<f64>) -> Result<Self> {
        let nv = layout.num_views();
        if w.shape() != (nv, nv) {
            return Err(SipcaError::Dimension(format!("weights must be {nv} x {nv}")));
        }
        for k in 0..nv {
            for l in 0..nv {
                let x = w[(k, l)];
                if !(x > 0.0 && x.is_finite()) {
                    return Err(SipcaError::InvalidParameter(format!("weight ({k},{l}) = {x} is not positive")));
                }
                if x != w[(l, k)] {
                    return Err(SipcaError::InvalidParameter(format!("weights not symmetric at ({k},{l})")));
                }
            }
        }
        Ok(WeightMatrix { layout, w })
    }

    /// `w_kl = sqrt(p_k p_l)`, which equals the common block size when all
    /// views have the same size.
    pub fn size_balanced(layout: &BlockLayout) -> Self {
        let nv = layout.num_views();
        let w = DMatrix::from_fn(nv, nv, |k, l| ((layout.size(k) * layout.size(l)) as f64).sqrt());
        WeightMatrix { layout: layout.clone(), w }
    }

    pub fn uniform(layout: &BlockLayout, value: f64) -> Result<Self> {
        let nv = layout.num_views();
        Self::new(layout.clone(), DMatrix::from_element(nv, nv, value))
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.w[(k, l)]
    }

    pub fn min(&self) -> f64 {
        self.w.min()
    }

    pub fn max(&self) -> f64 {
        self.w.max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(layout: &BlockLayout, rng: &mut ChaCha8Rng) -> SymBlockMatrix {
        let p = layout.dim();
        let m = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        SymBlockMatrix::symmetrized(layout.clone(), m).unwrap()
    }

    #[test]
    fn layout_offsets_and_lookup() {
        let l = BlockLayout::new(vec![2, 3, 1]).unwrap();
        assert_eq!(l.dim(), 6);
        assert_eq!(l.range(1), 2..5);
        let views: Vec<usize> = (0..6).map(|c| l.view_of(c)).collect();
        assert_eq!(views, vec![0, 0, 1, 1, 1, 2]);
        assert!(BlockLayout::new(vec![]).is_err());
        assert!(BlockLayout::new(vec![2, 0]).is_err());
    }

    #[test]
    fn layout_json_schema() {
        let l: BlockLayout = serde_json::from_str(r#"{"sizes":[3,4]}"#).unwrap();
        assert_eq!(l.dim(), 7);
        assert_eq!(serde_json::to_string(&l).unwrap(), r#"{"sizes":[3,4]}"#);
        assert!(serde_json::from_str::<BlockLayout>(r#"{"sizes":[0]}"#).is_err());
    }

    #[test]
    fn rejects_asymmetric_input() {
        let l = BlockLayout::single(2).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(matches!(SymBlockMatrix::new(l.clone(), m.clone()), Err(SipcaError::NotSymmetric { .. })));
        let s = SymBlockMatrix::symmetrized(l, m).unwrap();
        assert_eq!(s.get(0, 1), 2.05);
        assert_eq!(s.asymmetry(), 0.0);
    }

    #[test]
    fn l11_examples() {
        let l = BlockLayout::single(2).unwrap();
        assert_eq!(SymBlockMatrix::zeros(&l).norm_l11(), 0.0);
        let a = SymBlockMatrix::new(l, DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 3.0])).unwrap();
        assert_eq!(a.norm_l11(), 8.0);
        let l3 = BlockLayout::single(3).unwrap();
        assert_eq!(SymBlockMatrix::identity(&l3).norm_linf(), 1.0);
    }

    #[test]
    fn l11_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = BlockLayout::new(vec![2, 4]).unwrap();
        let a = random_sym(&l, &mut rng);
        let mut naive = 0.0;
        for s in 0..6 {
            for t in 0..6 {
                naive += a.get(s, t).abs();
            }
        }
        assert!((a.norm_l11() - naive).abs() < 1e-12);
    }

    #[test]
    fn group_norm_cases() {
        let l1 = BlockLayout::single(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_sym(&l1, &mut rng);
        let w1 = WeightMatrix::uniform(&l1, 1.0).unwrap();
        assert!((a.norm_group(&w1).unwrap() - a.frobenius()).abs() < 1e-12);
        assert_eq!(SymBlockMatrix::zeros(&l1).norm_group(&w1).unwrap(), 0.0);

        // one nonzero block pair (0,1)/(1,0) on a 2-view layout
        let l = BlockLayout::new(vec![2, 3]).unwrap();
        let mut m = DMatrix::zeros(5, 5);
        for r in 0..2 {
            for c in 2..5 {
                let x = rng.random_range(-1.0..1.0);
                m[(r, c)] = x;
                m[(c, r)] = x;
            }
        }
        let a = SymBlockMatrix::new(l.clone(), m).unwrap();
        let w = WeightMatrix::new(l.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 2.5, 2.5, 3.0])).unwrap();
        let mut naive = 0.0;
        for (k, rk) in [(0usize, 0..2usize), (1, 2..5)] {
            for (lv, rl) in [(0usize, 0..2usize), (1, 2..5)] {
                let mut ss = 0.0;
                for s in rk.clone() {
                    for t in rl.clone() {
                        ss += a.get(s, t).powi(2);
                    }
                }
                naive += w.get(k, lv) * ss.sqrt();
            }
        }
        assert!((a.norm_group(&w).unwrap() - naive).abs() < 1e-12);
        assert!((naive - 2.0 * 2.5 * a.block(0, 1).norm()).abs() < 1e-12);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let a = SymBlockMatrix::zeros(&BlockLayout::new(vec![2, 2]).unwrap());
        let w = WeightMatrix::size_balanced(&BlockLayout::new(vec![1, 3]).unwrap());
        assert!(matches!(a.norm_group(&w), Err(SipcaError::LayoutMismatch { .. })));
        assert!(a.norm_linf_star(&w).is_err());
    }

    #[test]
    fn default_weights_equal_block_size_for_equal_blocks() {
        let w = WeightMatrix::size_balanced(&BlockLayout::uniform(3, 7).unwrap());
        assert!((w.min() - 7.0).abs() < 1e-12 && (w.max() - 7.0).abs() < 1e-12);
        let w = WeightMatrix::size_balanced(&BlockLayout::new(vec![2, 8]).unwrap());
        assert_eq!(w.get(0, 1), 4.0);
    }

    #[test]
    fn conjugate_norm_inequalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = BlockLayout::new(vec![2, 3, 2]).unwrap();
        let w = WeightMatrix::size_balanced(&l);
        for _ in 0..1000 {
            let a = random_sym(&l, &mut rng);
            let b = random_sym(&l, &mut rng);
            let ip = a.dot(&b);
            assert!(ip <= a.norm_l11() * b.norm_linf() + 1e-10);
            assert!(ip <= a.norm_group(&w).unwrap() * b.norm_linf_star(&w).unwrap() + 1e-10);
        }
    }

    #[test]
    fn norms_are_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = BlockLayout::new(vec![3, 3]).unwrap();
        let w = WeightMatrix::size_balanced(&l);
        let a = random_sym(&l, &mut rng);
        for c in [-3.5, 0.25, 7.0] {
            let ca = a.scale(c);
            let rel = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1e-300);
            assert!(rel(ca.norm_l11(), c.abs() * a.norm_l11()));
            assert!(rel(ca.norm_linf(), c.abs() * a.norm_linf()));
            assert!(rel(ca.norm_group(&w).unwrap(), c.abs() * a.norm_group(&w).unwrap()));
            assert!(rel(ca.norm_linf_star(&w).unwrap(), c.abs() * a.norm_linf_star(&w).unwrap()));
        }
    }

    #[test]
    fn blocks_reassemble_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = BlockLayout::new(vec![1, 3, 2]).unwrap();
        let a = random_sym(&l, &mut rng);
        let blocks: Vec<Vec<DMatrix<f64>>> =
            (0..3).map(|k| (0..3).map(|j| a.block(k, j).into_owned()).collect()).collect();
        assert_eq!(blocks[1][2].shape(), (3, 2));
        let b = SymBlockMatrix::from_blocks(&l, &blocks).unwrap();
        assert_eq!(a, b);
    }
}
