use thiserror::Error;

/// Errors produced by the models, fits and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("pointing jitter is zero; no rule-of-thumb divergence exists, clamp to the hardware minimum")]
    ZeroJitter,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("link closed at every positive rate")]
    LinkClosed,

    #[error("receiver sensitivity is not configured")]
    MissingSensitivity,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::LinkClosed)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Rejects non-finite or non-positive values.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}
