use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("kernel is singular on the diagonal at t = s = {0}")]
    Singularity(f64),

    #[error("operation not supported for this model: {0}")]
    Unsupported(String),

    #[error("covariance matrix could not be factorised (jitter up to {jitter:e} tried)")]
    Conditioning { jitter: f64 },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("quadrature did not converge: estimated error {est_error:e} exceeds {allowed:e}")]
    Quadrature { est_error: f64, allowed: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
