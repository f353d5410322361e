use thiserror::Error;

/// Errors raised by the model functions when a precondition is violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("magnitude must be non-negative, got {0}")]
    NegativeMagnitude(f64),
    #[error("impedance magnitude is zero")]
    ZeroImpedance,
    #[error("voltage magnitude must be positive, got {0}")]
    ZeroVoltage(f64),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("leading coefficient is zero")]
    ZeroLeadingCoefficient,
    #[error("signal too short: need {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}

pub(crate) fn ensure_finite(name: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}
