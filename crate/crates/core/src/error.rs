use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:.3e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("matrix is not unitary (max defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("eigenvalue {value:.3e} is below the positivity floor")]
    NegativeEigenvalue { value: f64 },

    #[error("trace {trace} is not 1")]
    TraceNotUnit { trace: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("eigendecomposition reconstruction error {error:.3e} exceeds {tol:.3e}")]
    Reconstruction { error: f64, tol: f64 },

    #[error("invalid projector family: {0}")]
    InvalidFamily(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("index {index} out of range for {context} (size {len})")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        len: usize,
    },

    #[error("history set has {count} histories, above the cap of {cap}")]
    TooManyHistories { count: usize, cap: usize },

    #[error("history probability {value:.3e} is negative beyond tolerance")]
    NegativeProbability { value: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}
