use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    HardInvalid(String),
    #[error("closed-form constants unavailable: {0}")]
    ClosedFormUnavailable(String),
    #[error("intensity hit zero (lambda <= {floor:e} at grid index {idx})")]
    IntensityHitZero { idx: usize, floor: f64 },
    #[error("insertion time index {0} is not a grid node")]
    InsertOffGrid(usize),
    #[error("Laplace transform returned a non-finite value at node {0}")]
    EvaluationFailed(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
