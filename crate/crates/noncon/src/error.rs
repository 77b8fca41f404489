use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input failed validation before any computation started.
    #[error("validation: {0}")]
    Validation(String),

    /// A transition matrix row does not sum to one or has negative entries.
    #[error("matrix is not row-stochastic: {0}")]
    NonStochastic(String),

    /// The chain has no unique stationary law.
    #[error("chain is reducible; no unique stationary distribution")]
    ReducibleChain,

    /// gcd of the tower return times is not 1.
    #[error("tower is not aperiodic: gcd of return times is {0}")]
    Aperiodicity(u64),

    /// The declared exponential tail bound fails on the given level.
    #[error("tail bound m{{R>n}} <= q e^(-pn) fails at n={n}: mass {mass} > {bound}")]
    TailBound { n: usize, mass: f64, bound: f64 },

    /// An iteration did not reach the requested tolerance.
    #[error("no convergence after {iterations} iterations; residual {residual}")]
    Convergence { iterations: usize, residual: f64 },

    /// Operator/function grid sizes do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The asymptotic variance is (numerically) zero.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// The requested point is not periodic under the tower map.
    #[error("point is not periodic with period {0}")]
    NotPeriodic(usize),

    /// A cone operation was called on a function outside the cone.
    #[error("function is not a cone member ({0} functionals violated)")]
    NotConeMember(usize),

    /// A contraction certificate could not be produced.
    #[error("contraction certificate failed: {0}")]
    Certificate(String),

    /// Not enough data points for the requested fit or estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Operation is not supported for this input class.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
