use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Clone, Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to converge or produced an inconsistent result.
    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
