use thiserror::Error;

pub type Result<T> = std::result::Result<T, WitsError>;

#[derive(Debug, Error)]
pub enum WitsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sparse coding did not converge after {iterations} iterations (stationarity residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate reached before giving up, row-major `n x d`.
        best: Box<nalgebra::DMatrix<f64>>,
    },

    #[error("numerical failure during sweep {sweep}: {message}")]
    Numerical { sweep: usize, message: String },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("rule error: {0}")]
    Rule(String),

    #[error("event error: {0}")]
    Event(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl WitsError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        WitsError::InvalidInput(msg.into())
    }
}
