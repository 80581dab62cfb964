use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the estimator pipeline.
///
/// Every variant belongs to exactly one module; [`Error::module`] reports it so
/// callers can surface where a failure originated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative time {0} (all times must be >= 0)")]
    NegativeTime(f64),

    #[error("projection tail mass {tail:e} exceeds tolerance {tol:e}")]
    TailMassExceeded { tail: f64, tol: f64 },

    #[error("adaptive quadrature did not reach tolerance {tol:e} on [{lo}, {hi}]")]
    QuadratureNonConvergence { lo: f64, hi: f64, tol: f64 },

    #[error("near-singular Toeplitz head: |b0| = {head:e}, max |b_k| = {max:e}")]
    NearSingular { head: f64, max: f64 },

    #[error("rank-deficient design: Cholesky pivot ratio {ratio:e} (M = {size}, n = {n})")]
    RankDeficientDesign { ratio: f64, size: usize, n: usize },

    #[error("no samples remain after shifting by delay {delta}")]
    EmptyAfterShift { delta: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("degenerate regression: all regressors are equal")]
    DegenerateRegression,

    #[error("negative variance {0:e} in SNR calibration")]
    NegativeVariance(f64),

    #[error("grid is not equispaced (relative spacing spread {0:e})")]
    IrregularGrid(f64),

    #[error("{failed} of {total} replicates failed; first failure: {first}")]
    ReplicateFailures {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },
}

impl Error {
    /// Name of the module the error comes from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } => "input",
            Error::NegativeTime(_) | Error::TailMassExceeded { .. } => "laguerre",
            Error::QuadratureNonConvergence { .. } => "quadrature",
            Error::NearSingular { .. } => "toeplitz",
            Error::RankDeficientDesign { .. } | Error::EmptyAfterShift { .. } => "design",
            Error::NotSymmetric(_) | Error::DegenerateRegression => "select",
            Error::NegativeVariance(_) | Error::ReplicateFailures { .. } => "simulate",
            Error::IrregularGrid(_) => "baseline",
        }
    }

    /// True when the error stems from bad user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::NegativeTime(_)
                | Error::EmptyAfterShift { .. }
                | Error::IrregularGrid(_)
        )
    }
}
