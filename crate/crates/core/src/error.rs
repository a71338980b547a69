use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: need at least {required} samples, got {got}")]
    InsufficientData { required: usize, got: usize },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("fit did not converge after {iterations} iterations (ssr = {ssr:e}, last parameters = {last:?})")]
    NonConvergence {
        iterations: usize,
        ssr: f64,
        last: Vec<f64>,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("sampling acceptance {acceptance:.3e} is below the 1% floor")]
    Acceptance { acceptance: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects NaN and infinities for a named input.
pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}
