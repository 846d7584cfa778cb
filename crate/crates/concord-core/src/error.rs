use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A symmetric matrix expected to admit a Cholesky factorization does not.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Adaptive quadrature exhausted its subdivision budget. The best
    /// available estimate and its error bound are attached.
    #[error("quadrature did not converge: best estimate {estimate:e} with error bound {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    /// Too few observations for the requested computation.
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    /// Vector/matrix shapes are inconsistent.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The requested quantity has no defined value for these inputs
    /// (degenerate data, zero denominator, undefined variance, ...).
    #[error("undefined result: {0}")]
    Undefined(String),

    /// The requested combination of options has no implemented formula.
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// Iterative estimation failed in a non-recoverable way.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A configuration file or scenario description could not be parsed.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
