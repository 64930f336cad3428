use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown lagrangian `{0}`")]
    UnknownLagrangian(String),
    #[error("could not bracket the inverse derivative at s = {0}")]
    InversionFailure(f64),
    #[error("ball of radius {radius} around {center:?} leaves the grid domain")]
    OutOfDomain { center: Vec<f64>, radius: f64 },
    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),
    #[error("boundary data failed at node {node} ({point:?}): {source}")]
    BoundaryEvaluation {
        node: usize,
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("test function does not vanish on the boundary ring (max |psi| = {0})")]
    InvalidTestFunction(f64),
    #[error("lagrangian failed the convexity audit: {0}")]
    NonConvex(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("singular point: x = 0")]
    SingularPoint,
    #[error("gradient cloud is empty")]
    EmptyCloud,
    #[error("coefficients are not elliptic (mu = {0} <= -1)")]
    NotElliptic(f64),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
