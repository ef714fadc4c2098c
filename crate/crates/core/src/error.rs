use thiserror::Error;

use crate::sampler::RunStats;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The drift or its derivative produced a non-finite value.
    #[error("non-finite drift evaluation at y = {0}")]
    Evaluation(f64),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The rejection loop ran out of iterations. Carries the work done so far.
    #[error("iteration budget of {limit} exhausted")]
    Budget { limit: u64, partial: Box<RunStats> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
