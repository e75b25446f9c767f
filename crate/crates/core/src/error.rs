use thiserror::Error;

use crate::coeffs::Regime;
use crate::spectral::Space;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lambda1 and lambda6 are both zero")]
    ZeroCoefficients,

    #[error("operation requires the deceleration regime, coefficients are {0:?}")]
    WrongRegime(Regime),

    #[error("|W1| vanishes at xi index {index}")]
    ZeroAmplitude { index: usize },

    #[error("time argument must be nonzero")]
    ZeroTime,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("expected a field in {expected:?} space, found {found:?}")]
    WrongSpace { expected: Space, found: Space },

    #[error(
        "domain exhausted at t = {t}: component {component} has mass fraction {fraction:e} \
         outside |x| < L/4 (tolerance {tolerance:e})"
    )]
    DomainExhaustion {
        t: f64,
        component: usize,
        fraction: f64,
        tolerance: f64,
    },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("time step underflow at t = {t}: consecutive steps do not advance")]
    StepUnderflow { t: f64 },

    #[error("insufficient data: {found} samples in window, at least {needed} required")]
    InsufficientData { found: usize, needed: usize },

    #[error("non-positive value {value} at t = {t} cannot be fitted on a log scale")]
    NonPositiveValue { t: f64, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable identifier used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroCoefficients => "ZeroCoefficients",
            Error::WrongRegime(_) => "WrongRegime",
            Error::ZeroAmplitude { .. } => "ZeroAmplitude",
            Error::ZeroTime => "ZeroTime",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::GridMismatch => "GridMismatch",
            Error::WrongSpace { .. } => "WrongSpace",
            Error::DomainExhaustion { .. } => "DomainExhaustion",
            Error::NonFinite { .. } => "NonFinite",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::NonPositiveValue { .. } => "NonPositiveValue",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DomainExhaustion { .. } | Error::NonFinite { .. } | Error::StepUnderflow { .. }
        )
    }
}
