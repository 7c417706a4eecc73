use thiserror::Error;

/// Failure modes of the damped Newton solver for the transformed problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NewtonFailure {
    #[error("Jacobian is numerically singular (near a turning point)")]
    SingularJacobian,
    #[error("backtracking exhausted without residual decrease")]
    NoDecrease,
    #[error("converged to the trivial solution")]
    ConvergedToTrivial,
    #[error("converged, but the solution is not strictly positive")]
    NonPositive,
    #[error("iteration cap reached without convergence")]
    NotConverged,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degenerate exponents: r = p")]
    DegenerateExponent,
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error("seed correction failed: {0}")]
    Seed(String),
    #[error("newton: {0}")]
    Newton(#[from] NewtonFailure),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
