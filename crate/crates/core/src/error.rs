use thiserror::Error;

/// Errors raised by the freeknot library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("knot vector needs at least {min} entries, got {len}")]
    InvalidArity { len: usize, min: usize },

    #[error("knot {x} lies outside [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("knot vector is not non-decreasing at index {index}")]
    Unsorted { index: usize },

    #[error("knot vector contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("local knot vector of degree {degree} needs {expected} knots, got {found}")]
    LocalArity {
        degree: usize,
        expected: usize,
        found: usize,
    },

    #[error("value is a distribution and has no pointwise evaluation: {0}")]
    DistributionalValue(&'static str),

    #[error("derivative of order {order} exceeds degree {degree}")]
    DerivativeOrder { order: usize, degree: usize },

    #[error("function does not provide a derivative of order {order}")]
    MissingDerivative { order: usize },

    #[error("knot index {index} is out of bounds for {len} knots")]
    KnotIndex { index: usize, len: usize },

    #[error("quadrature order {0} is not supported (1..=32)")]
    QuadratureOrder(usize),

    #[error("break partition has no cells")]
    EmptyPartition,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("invalid degree: {0}")]
    InvalidDegree(String),

    #[error("entry is not differentiable with respect to the knots: {0}")]
    NonDifferentiable(String),

    #[error("feasible set is empty: {0}")]
    Infeasible(String),

    #[error("projection failed: {0}")]
    ProjectionFailed(String),

    #[error("linear solver diverged after {iterations} iterations")]
    Divergence { iterations: usize },

    #[error("configuration not supported: {0}")]
    Capability(String),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
