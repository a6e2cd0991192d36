use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("dimension {dim} exceeds cap {cap}")]
    CapExceeded { dim: usize, cap: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("endpoints do not bracket a transition: verdict at lo = {lo}, at hi = {hi}")]
    Bracket { lo: String, hi: String },
}
