use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("kernel scale {beta} is below 2h = {min} (under-resolved on this grid)")]
    UnderResolved { beta: f64, min: f64 },
    #[error("frequency |xi| = {norm} exceeds the resolvability guard {guard}")]
    FrequencyGuard { norm: f64, guard: f64 },
    #[error("curve invariant violated: {0}")]
    CurveInvariant(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
