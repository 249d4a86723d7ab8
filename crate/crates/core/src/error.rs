use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Increment width is not an integer multiple of the grid cell width.
    #[error("h = {h} is not an integer multiple of dx = {dx}")]
    Alignment { h: f64, dx: f64 },

    /// The test function lacks a derivative the operation needs.
    #[error("function `{function}` does not provide derivative of order {order}")]
    MissingDerivative { function: String, order: u8 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("degenerate conditional variance {0:e}")]
    DegenerateVariance(f64),

    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LabError {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::DegenerateVariance(_) => 3,
            LabError::Io(_) | LabError::Csv(_) => 1,
            _ => 2,
        }
    }
}
