use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point} outside the domain of {family}")]
    Domain { family: &'static str, point: f64 },

    #[error("invalid interval [{lo}, {hi}]")]
    Interval { lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid function spec: {0}")]
    InvalidFunction(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("interaction matrix is not upper-triangular (w[{row}][{col}] = {value})")]
    NotUpperTriangular { row: usize, col: usize, value: f64 },

    #[error("singular matrix (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("{method} did not converge within {iterations} iterations")]
    NonConvergence { method: &'static str, iterations: usize },

    #[error("integration produced a non-finite state at t = {time}")]
    Integration { time: f64, last_good: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
