use thiserror::Error;

/// Errors raised across the toolkit.
///
/// `Config` covers every precondition that can be checked before a run
/// starts; the remaining variants describe failures discovered while running.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parameters are not critical: {0}")]
    NotCritical(String),

    #[error("integration blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("phase undefined: kappa = {kappa} below floor {floor} at t = {t}")]
    PhaseUndefined { t: f64, kappa: f64, floor: f64 },

    #[error("empty sample: {0}")]
    EmptySample(&'static str),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Validation failures map to exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::NotCritical(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("expected a positive finite number, got {value}")))
    }
}

pub(crate) fn require_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("expected a finite number, got {value}")))
    }
}
