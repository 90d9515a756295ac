use thiserror::Error;

/// Errors produced by the simulation pipeline.
#[derive(Debug, Error)]
pub enum WdError {
    /// One or more declared constraints failed; each entry names the
    /// offending field and what was expected.
    #[error("validation failed: {}", violations.join("; "))]
    Validation { violations: Vec<String> },

    /// A quadrature or extrapolation did not reach the requested accuracy.
    #[error("{context}: achieved error {achieved:.3e} exceeds requested {requested:.3e}")]
    Numerical {
        context: String,
        achieved: f64,
        requested: f64,
    },

    /// Operation called outside its domain (wrong family, N out of range, ...).
    #[error("{0}")]
    Domain(String),

    /// Wick assembly asked the amplitude table for an index it does not hold.
    #[error("amplitude table has no entry for {index}")]
    MissingAmplitude { index: String },

    /// Detector pair too close for the factorized-evolution assumption.
    #[error(
        "detectors {a} and {b} are causally connected: separation {separation} <= max duration {duration} (set waive_causality to override)"
    )]
    Causality {
        a: String,
        b: String,
        separation: f64,
        duration: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl WdError {
    pub fn validation(violations: Vec<String>) -> Self {
        WdError::Validation { violations }
    }

    pub fn numerical(context: impl Into<String>, achieved: f64, requested: f64) -> Self {
        WdError::Numerical {
            context: context.into(),
            achieved,
            requested,
        }
    }
}

pub type Result<T> = std::result::Result<T, WdError>;
