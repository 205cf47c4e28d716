use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("polyhedron is empty")]
    EmptyPolyhedron,
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded: {0}")]
    Unbounded(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("market admits arbitrage")]
    Arbitrage,
    #[error("not a face: {0}")]
    NotAFace(String),
    #[error("stale frontier: {0}")]
    StaleFrontier(String),
}

pub type Result<T> = std::result::Result<T, Error>;
