use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient check failed: {0}")]
    Coefficient(String),

    #[error("singular system at step {step}: zero pivot in row {row}")]
    Singular { step: usize, row: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("smoothing required: the regularization term is not differentiable at f = 0 when delta = 0")]
    SmoothingRequired,

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("diffeomorphism construction failed: {0}")]
    Construction(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
