//! Error types shared across the library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building matrices, evaluating
/// statistics, or running a Monte Carlo campaign.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (zero vector,
    /// negative epsilon, non-finite entries, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix deviates from Hermitian symmetry beyond tolerance.
    #[error("matrix is not Hermitian: max |M - M^H| entry = {max_asymmetry:.3e} (tolerance {tolerance:.3e})")]
    NotHermitian { max_asymmetry: f64, tolerance: f64 },

    /// Matrix has an eigenvalue below the negative tolerance band.
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e} < -{tolerance:.3e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    /// Matrix is singular (or numerically so) where positive definiteness
    /// is required.
    #[error("singular matrix: min eigenvalue {min_eigenvalue:.3e} vs max {max_eigenvalue:.3e}")]
    SingularMatrix { min_eigenvalue: f64, max_eigenvalue: f64 },

    /// A statistic is undefined on this input (e.g. GASD with Z = 0).
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    /// A run configuration is inconsistent or out of range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A persisted threshold does not match the scenario it is applied to.
    #[error("stale threshold: {0}")]
    StaleThreshold(String),

    /// Two scenarios cannot be compared (different dimensions).
    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    /// A brute-force oracle refused the instance or failed internally.
    #[error("oracle failure: {0}")]
    OracleFailure(String),

    /// Filesystem or serialization problem while reading/writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization problem.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
