use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation was called in a regime where it does not apply.
    #[error("state error: {0}")]
    State(String),

    /// A root could not be bracketed although one is guaranteed to exist.
    #[error("bracketing failure: {0}")]
    Bracket(String),

    /// An iterative method stopped without meeting its tolerance.
    #[error(
        "{method} did not converge after {iterations} iterations (last residuals {residuals:?})"
    )]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residuals: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn require_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!("{name} must be finite, got {v}")))
    }
}
