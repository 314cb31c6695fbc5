use thiserror::Error;

#[derive(Debug, Error)]
pub enum SipcaError {
    #[error("invalid block layout: {0}")]
    InvalidLayout(String),

    #[error("layout mismatch: expected {expected:?}, found {found:?}")]
    LayoutMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("matrix is not symmetric: |A[{row},{col}] - A[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible sparsity design: {0}")]
    InfeasibleDesign(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("empty bulk window: no eigenvalue ranks fall in [{lo}, {hi}]")]
    EmptyBulk { lo: f64, hi: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("level {level} failed: {source}")]
    LevelFailed {
        level: usize,
        #[source]
        source: Box<SipcaError>,
        /// Eigenvectors of the levels that finished before the failure.
        completed: Vec<Vec<f64>>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, SipcaError>;

impl SipcaError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SipcaError::Io { path: path.as_ref().display().to_string(), source }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, msg: impl ToString) -> Self {
        SipcaError::Format { path: path.as_ref().display().to_string(), msg: msg.to_string() }
    }

    /// True for failures caused by the numbers rather than by inputs or I/O.
    pub fn is_numeric(&self) -> bool {
        match self {
            SipcaError::Numerical(_) | SipcaError::EmptyBulk { .. } => true,
            SipcaError::LevelFailed { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, SipcaError::Io { .. } | SipcaError::Format { .. })
    }
}
