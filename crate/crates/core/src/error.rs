use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge on [{lo}, {hi}]: error estimate {error:e} above tolerance {tolerance:e} at depth {depth}")]
    NonConvergence {
        lo: f64,
        hi: f64,
        error: f64,
        tolerance: f64,
        depth: u32,
    },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("negative outcome probability {value:e} for {label}")]
    NegativeProbability { label: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state is not normalized: weight {weight} over [{lo}, {hi}]")]
    NotNormalized { weight: f64, lo: f64, hi: f64 },

    #[error("no interval with weight >= {target} found after {doublings} doublings")]
    Unnormalizable { target: f64, doublings: u32 },

    #[error("maximum refinement depth {max_depth} reached: {what}")]
    MaxDepth { max_depth: u32, what: String },

    #[error("could not parse {what}: {reason}")]
    Parse { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
