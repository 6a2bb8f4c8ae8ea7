use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum UldpError {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid privacy budget {0} (must be finite and > 0)")]
    Budget(f64),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid block design: {0}")]
    Design(String),

    #[error("no block design supplied for block size {0}")]
    MissingDesign(usize),

    #[error("gamma weights are infeasible: residual {residual:e} at sensitive symbol {symbol}")]
    Infeasible { symbol: usize, residual: f64 },

    #[error("score is undefined: output has zero probability under the data distribution")]
    UndefinedScore,

    #[error("estimator is degenerate: all mixture mass sits on block size v")]
    EstimatorDegenerate,

    #[error("no intermediate regime when v = 1")]
    NoIntermediateRegime,

    #[error("solver failed: {0}")]
    SolverFailure(String),

    #[error("{0} is too large for a dense mechanism")]
    TooLarge(String),

    #[error("operation not supported by the streaming backend: {0}")]
    Unsupported(&'static str),

    #[error("sufficient statistics do not match the estimator: {0}")]
    StatsMismatch(String),

    #[error("no samples to estimate from")]
    EmptySample,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, UldpError>;

pub(crate) fn check_budget(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(UldpError::Budget(epsilon))
    }
}
