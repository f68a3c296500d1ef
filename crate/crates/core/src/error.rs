use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: left is {left:?}, right is {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("svd did not converge on a {rows}x{cols} matrix")]
    SvdNotConverged { rows: usize, cols: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("composite prox did not converge after {iterations} iterations (last residual {residual:e})")]
    ProxNotConverged { iterations: usize, residual: f64 },

    #[error("objective diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        objective_trace: Vec<f64>,
    },

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("constrained solve did not converge: {0}")]
    ConstrainedSolve(String),

    #[error("noise model `{0}` cannot be sampled")]
    NotSampleable(&'static str),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
