use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or constructor argument violates its contract.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("the opinion model requires a learning rate `gamma`")]
    MissingGamma,

    #[error("awareness control must be non-negative, got {0}")]
    NegativeAwareness(f64),

    #[error("step size underflow at t = {t}: h = {h:e}, state = {state:?}")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("state left the unit box at t = {t}: coordinate {index} = {value}, state = {state:?}")]
    LeftUnitBox {
        t: f64,
        index: usize,
        value: f64,
        state: Vec<f64>,
    },

    #[error("non-finite derivative at t = {t}, state = {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },

    #[error("trajectory covers [{start}, {end}] but t = {t} was requested")]
    OutsideTrajectory { t: f64, start: f64, end: f64 },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown preset `{name}`; available presets: {}", available.join(", "))]
    UnknownPreset { name: String, available: Vec<String> },

    #[error("failed to parse config {path}: {reason}")]
    ConfigParse { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems, as opposed to failures of the numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidConfig { .. }
            | Error::MissingGamma
            | Error::UnknownPreset { .. }
            | Error::ConfigParse { .. } => true,
            Error::Iteration { source, .. } => source.is_config_error(),
            _ => false,
        }
    }

    /// Numerical failures: integrator breakdowns and invariant violations.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::StepUnderflow { .. }
            | Error::LeftUnitBox { .. }
            | Error::NonFinite { .. }
            | Error::OutsideTrajectory { .. }
            | Error::NegativeAwareness(_) => true,
            Error::Iteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
