use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),
    #[error("no confining scale: K and nu^2 are both zero")]
    NoConfiningScale,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver failure at t = {t}: {reason}")]
    Solver { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
