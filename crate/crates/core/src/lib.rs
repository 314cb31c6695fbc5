//! Sparse and integrative principal component analysis for multiview data.
//!
//! Eigenvectors of a (denoised) covariance are estimated one at a time by
//! maximizing `<S, H>` over a deflated Fantope minus an elementwise lasso and
//! a blockwise group-lasso penalty, solved with (locally adaptive) ADMM.

pub mod bench;
pub mod cli;
pub mod blockmat;
pub mod denoise;
pub mod error;
pub mod fantope;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mp;
pub mod pipeline;
pub mod prox;
pub mod simulate;
pub mod solver;
pub mod tuning;

pub use blockmat::{BlockLayout, SymBlockMatrix, WeightMatrix};
pub use error::{Result, SipcaError};
pub use fantope::Projector;
pub use solver::{AdmmConfig, PenaltyConfig, SipcaFit};
