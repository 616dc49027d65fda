use thiserror::Error;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A domain invariant failed; `field` names the offending quantity.
    #[error("validation failed for `{field}`: {message}")]
    Validation { field: String, message: String },

    /// The integrator produced a non-finite component.
    #[error("integration failure at t = {t}: component {component} is not finite")]
    Integration { t: f64, component: usize },

    /// A state component went negative beyond the clamping tolerance.
    #[error("component {component} = {value:e} at t = {t} is negative beyond tolerance {tolerance:e}")]
    NegativeState {
        t: f64,
        component: usize,
        value: f64,
        tolerance: f64,
    },

    /// Adaptive step-size control failed to find an acceptable step.
    #[error("adaptive step failure at t = {t}: step size underflow after repeated rejections")]
    StepFailure { t: f64 },

    /// Two objects that must share a time grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// phi*eta_A <= (eta_A + mu_A)*mu_m: no positive aquatic equilibrium, R0 undefined.
    #[error("mosquito viability violated: phi*eta_A must exceed (eta_A + mu_A)*mu_m")]
    Viability,

    #[error("unknown preset `{0}` (available: epidemic, endemic)")]
    UnknownPreset(String),

    #[error("unknown compartment `{0}`")]
    UnknownCompartment(String),

    /// Scenario file could not be parsed; message carries serde's line/column.
    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
