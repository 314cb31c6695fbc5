//! Multiview data from the spiked covariance model
//! `y = mu + sum_j sqrt(gamma_j) z_j v_j + e`, with noise variance constant
//! within a view and possibly different across views.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blockmat::{BlockLayout, SymBlockMatrix};
use crate::error::{Result, SipcaError};
use crate::linalg::orthonormal_span;

const ORTHO_TOL: f64 = 1e-10;

// Independent RNG streams derived from one seed.
const STREAM_VECTORS: u64 = 0;
const STREAM_SIGMAS: u64 = 1;
const STREAM_DATA: u64 = 2;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub struct SpikedModelSpec {
    pub layout: BlockLayout,
    pub eigenvalues: Vec<f64>,
    /// `p x r`, orthonormal columns.
    pub eigenvectors: DMatrix<f64>,
    pub noise_variances: Vec<f64>,
    pub mean: DVector<f64>,
}

impl SpikedModelSpec {
    pub fn new(
        layout: BlockLayout,
        eigenvalues: Vec<f64>,
        eigenvectors: DMatrix<f64>,
        noise_variances: Vec<f64>,
    ) -> Result<Self> {
        let p = layout.dim();
        let r = eigenvalues.len();
        if eigenvectors.shape() != (p, r) {
            return Err(SipcaError::Dimension(format!(
                "eigenvectors are {:?}, expected ({p}, {r})",
                eigenvectors.shape()
            )));
        }
        if noise_variances.len() != layout.num_views() {
            return Err(SipcaError::Dimension("one noise variance per view is required".into()));
        }
        if eigenvalues.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(SipcaError::InvalidParameter("spike eigenvalues must be positive".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] <= w[1]) {
            return Err(SipcaError::InvalidParameter("spike eigenvalues must be strictly decreasing".into()));
        }
        if noise_variances.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(SipcaError::InvalidParameter("noise variances must be nonnegative".into()));
        }
        let gram_err = (eigenvectors.tr_mul(&eigenvectors) - DMatrix::identity(r, r)).amax();
        if r > 0 && gram_err > ORTHO_TOL {
            return Err(SipcaError::InvalidParameter(format!("eigenvectors not orthonormal (error {gram_err:e})")));
        }
        Ok(SpikedModelSpec { mean: DVector::zeros(p), layout, eigenvalues, eigenvectors, noise_variances })
    }

    pub fn with_mean(mut self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.layout.dim() {
            return Err(SipcaError::Dimension("mean has wrong length".into()));
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Sigma_1 = sum_j gamma_j v_j v_j^T`.
    pub fn signal_covariance(&self) -> SymBlockMatrix {
        SymBlockMatrix::from_outer_products(&self.layout, &self.eigenvectors, &self.eigenvalues)
            .expect("shape validated on construction")
    }

    /// `Sigma_1 + blockdiag(sigma_i^2 I)`.
    pub fn population_covariance(&self) -> SymBlockMatrix {
        let mut m = self.signal_covariance().into_matrix();
        for (k, &s2) in self.noise_variances.iter().enumerate() {
            for i in self.layout.range(k) {
                m[(i, i)] += s2;
            }
        }
        SymBlockMatrix::from_symmetric_unchecked(self.layout.clone(), m)
    }
}

/// Block and element sparsity of the true eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityDesign {
    /// Active views (0-based) of each eigenvector.
    pub block_supports: Vec<Vec<usize>>,
    /// Fraction of nonzero coordinates inside each active view, in (0, 1].
    pub fill: f64,
    pub seed: u64,
}

impl SparsityDesign {
    /// Supports {1,2,3}, {4,5,6}, {7,8} (1-based), truncated to the first
    /// `views` views.
    pub fn three_spike(views: usize, fill: f64, seed: u64) -> Result<Self> {
        let full = [vec![0, 1, 2], vec![3, 4, 5], vec![6, 7]];
        let block_supports: Vec<Vec<usize>> =
            full.iter().map(|s| s.iter().copied().filter(|&k| k < views).collect()).collect();
        if block_supports.iter().any(|s| s.is_empty()) {
            return Err(SipcaError::InfeasibleDesign(format!("{views} views leave an eigenvector without support")));
        }
        Ok(SparsityDesign { block_supports, fill, seed })
    }

    pub fn rank(&self) -> usize {
        self.block_supports.len()
    }
}

/// Draws the `p x r` orthonormal eigenvector matrix of a sparsity design.
///
/// Each active view of column `j` gets `ceil(fill * p_i)` coordinates chosen
/// uniformly without replacement, filled with standard normal draws. Column
/// `j` is then orthogonalized against earlier columns using only its own
/// support coordinates, so supports are preserved exactly; with disjoint
/// supports this reduces to normalizing each column.
pub fn build_eigenvectors(design: &SparsityDesign, layout: &BlockLayout) -> Result<DMatrix<f64>> {
    if !(design.fill > 0.0 && design.fill <= 1.0) {
        return Err(SipcaError::InvalidParameter(format!("fill fraction {} not in (0, 1]", design.fill)));
    }
    let p = layout.dim();
    let r = design.rank();
    let mut rng = rng_for(design.seed, STREAM_VECTORS);
    let mut out = DMatrix::zeros(p, r);

    for (j, views) in design.block_supports.iter().enumerate() {
        if views.is_empty() {
            return Err(SipcaError::InfeasibleDesign(format!("eigenvector {j} has no active view")));
        }
        let mut coords = Vec::new();
        for &k in views {
            if k >= layout.num_views() {
                return Err(SipcaError::InfeasibleDesign(format!("view {k} out of range")));
            }
            let pk = layout.size(k);
            let count = ((design.fill * pk as f64).ceil() as usize).clamp(1, pk);
            let mut picked: Vec<usize> = sample_indices(&mut rng, pk, count).into_iter().collect();
            picked.sort_unstable();
            coords.extend(picked.into_iter().map(|i| layout.offset(k) + i));
        }
        coords.sort_unstable();
        coords.dedup();

        let mut x = DVector::from_iterator(coords.len(), coords.iter().map(|_| StandardNormal.sample(&mut rng)));
        if j > 0 {
            let prev = DMatrix::from_fn(coords.len(), j, |a, c| out[(coords[a], c)]);
            let q = orthonormal_span(&prev, 1e-12);
            if q.ncols() >= coords.len() {
                return Err(SipcaError::InfeasibleDesign(format!(
                    "support of eigenvector {j} ({} coordinates) is spanned by earlier eigenvectors",
                    coords.len()
                )));
            }
            for _ in 0..2 {
                let proj = &q * q.tr_mul(&x);
                x -= proj;
            }
        }
        let nrm = x.norm();
        if !(nrm > 1e-8) {
            return Err(SipcaError::InfeasibleDesign(format!("eigenvector {j} vanished after orthogonalization")));
        }
        x /= nrm;
        for (a, &i) in coords.iter().enumerate() {
            out[(i, j)] = x[a];
        }
    }
    Ok(out)
}

/// `sigma_i^2 = sigma2_bar * I * u_i^alpha / sum_k u_k^alpha`, `u_k ~ U[0, 1]`.
pub fn heteroskedastic_sigmas(views: usize, sigma2_bar: f64, alpha: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_for(seed, STREAM_SIGMAS);
    heteroskedastic_sigmas_with(views, sigma2_bar, alpha, &mut rng)
}

pub fn heteroskedastic_sigmas_with<R: Rng>(views: usize, sigma2_bar: f64, alpha: f64, rng: &mut R) -> Result<Vec<f64>> {
    if views == 0 {
        return Err(SipcaError::InvalidParameter("need at least one view".into()));
    }
    if !(sigma2_bar >= 0.0 && sigma2_bar.is_finite()) {
        return Err(SipcaError::InvalidParameter(format!("average noise level {sigma2_bar} must be nonnegative")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(SipcaError::InvalidParameter(format!("heteroskedasticity {alpha} must be nonnegative")));
    }
    let powered: Vec<f64> = (0..views).map(|_| rng.random::<f64>().powf(alpha)).collect();
    let total: f64 = powered.iter().sum();
    if !(total > 0.0) {
        return Err(SipcaError::Numerical("all heteroskedasticity weights underflowed to zero".into()));
    }
    let count = views as f64;
    Ok(powered.iter().map(|&w| sigma2_bar * (count * w / total)).collect())
}

/// `n` i.i.d. rows from the model.
pub fn sample(spec: &SpikedModelSpec, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, STREAM_DATA);
    let p = spec.layout.dim();
    let r = spec.rank();
    let roots: Vec<f64> = spec.eigenvalues.iter().map(|g| g.sqrt()).collect();
    let noise_sd: Vec<f64> = (0..p).map(|i| spec.noise_variances[spec.layout.view_of(i)].sqrt()).collect();
    let mut x = DMatrix::zeros(n, p);
    let mut z = vec![0.0; r];
    for row in 0..n {
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(&mut rng);
        }
        for i in 0..p {
            let e: f64 = StandardNormal.sample(&mut rng);
            let mut val = spec.mean[i] + noise_sd[i] * e;
            for j in 0..r {
                val += roots[j] * z[j] * spec.eigenvectors[(i, j)];
            }
            x[(row, i)] = val;
        }
    }
    x
}

/// Signal strength presets for the three-spike design; eigenvalues are
/// quoted for `p = 1000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalRegime {
    Weak,
    Strong,
}

impl SignalRegime {
    pub fn eigenvalues(self) -> [f64; 3] {
        match self {
            SignalRegime::Weak => [40.0, 20.0, 10.0],
            SignalRegime::Strong => [400.0, 200.0, 100.0],
        }
    }
}

impl std::str::FromStr for SignalRegime {
    type Err = SipcaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(SignalRegime::Weak),
            "strong" => Ok(SignalRegime::Strong),
            _ => Err(SipcaError::InvalidParameter(format!("unknown signal regime {s:?} (weak|strong)"))),
        }
    }
}

/// One simulated dataset of the three-spike multiview design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSetup {
    pub views: usize,
    pub block_size: usize,
    pub n: usize,
    pub signal: SignalRegime,
    /// Multiply the preset eigenvalues by `p / 1000`.
    pub scale_to_dimension: bool,
    pub alpha: f64,
    pub sigma2_bar: f64,
    pub fill: f64,
    pub seed: u64,
}

impl Default for SimulationSetup {
    fn default() -> Self {
        SimulationSetup {
            views: 20,
            block_size: 50,
            n: 200,
            signal: SignalRegime::Weak,
            scale_to_dimension: true,
            alpha: 0.0,
            sigma2_bar: 0.5,
            fill: 0.5,
            seed: 0,
        }
    }
}

pub struct SimulatedData {
    pub spec: SpikedModelSpec,
    pub design: SparsityDesign,
    pub data: DMatrix<f64>,
}

impl SimulationSetup {
    pub fn layout(&self) -> Result<BlockLayout> {
        BlockLayout::uniform(self.views, self.block_size)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let scale = if self.scale_to_dimension { (self.views * self.block_size) as f64 / 1000.0 } else { 1.0 };
        self.signal.eigenvalues().iter().map(|g| g * scale).collect()
    }

    pub fn model(&self) -> Result<(SpikedModelSpec, SparsityDesign)> {
        let layout = self.layout()?;
        let design = SparsityDesign::three_spike(self.views, self.fill, self.seed)?;
        let vectors = build_eigenvectors(&design, &layout)?;
        let sigmas = heteroskedastic_sigmas(self.views, self.sigma2_bar, self.alpha, self.seed)?;
        let spec = SpikedModelSpec::new(layout, self.eigenvalues(), vectors, sigmas)?;
        Ok((spec, design))
    }

    pub fn generate(&self) -> Result<SimulatedData> {
        if self.n < 1 {
            return Err(SipcaError::TooFewSamples { needed: 1, got: self.n });
        }
        let (spec, design) = self.model()?;
        let data = sample(&spec, self.n, self.seed);
        Ok(SimulatedData { spec, design, data })
    }
}
