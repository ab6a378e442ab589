use thiserror::Error;

/// Errors raised by the kernels, solvers and file formats of this crate.
#[derive(Debug, Error)]
pub enum IrlsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (asymmetry {asymmetry:e} exceeds {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("symmetric eigendecomposition failed to converge")]
    EigFailedToConverge,

    #[error("real Schur decomposition failed to converge")]
    SchurFailedToConverge,

    #[error("negative power of a singular matrix without smoothing (min eigenvalue {min_eigenvalue:e})")]
    SingularShift { min_eigenvalue: f64 },

    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Sylvester pencil is singular to working precision: {0}")]
    NearSingularPencil(String),

    #[error("exponent {0} outside (0, 2]")]
    InvalidExponent(f64),

    #[error("smoothing parameter must be positive, got {0}")]
    NonPositiveMu(f64),

    #[error("groups do not partition 0..{len}: {reason}")]
    InvalidGroups { len: usize, reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("label vectors differ in length ({pred} vs {truth})")]
    LengthMismatch { pred: usize, truth: usize },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<IrlsError>,
    },

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IrlsError {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        IrlsError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, IrlsError>;
