use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate cubic: leading coefficient is zero")]
    DegenerateCubic,

    #[error("no convergence after {iterations} iterations (best estimate {estimate})")]
    ConvergenceFailure { iterations: usize, estimate: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("line search failed after {attempts} backtracking steps")]
    LineSearchFailure { attempts: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid reference value {0}: must be finite and positive")]
    InvalidReference(f64),

    #[error("cannot split {rows} rows across {nodes} nodes")]
    InvalidPartition { rows: usize, nodes: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed container: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
