use thiserror::Error;

/// Errors raised by model construction, sampling and assessment.
#[derive(Debug, Error)]
pub enum Error {
    #[error("AR coefficients {0:?} lie outside the stationarity region (all characteristic roots must lie strictly outside the unit circle)")]
    NonStationary(Vec<f64>),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("index {index} out of range ({context})")]
    IndexOutOfRange { index: usize, context: &'static str },

    #[error("invalid distribution parameters: {0}")]
    InvalidSpec(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("transformed design X*'X* is singular")]
    SingularDesign,

    #[error("residual sum of squares is zero; the inverse-gamma rate must be positive")]
    DegenerateResidual,

    #[error("predictive variance is degenerate ({0:e})")]
    DegenerateVariance(f64),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("chain has no draws")]
    EmptyChain,

    #[error("chain too short: need at least {needed} values, found {found}")]
    ChainTooShort { needed: usize, found: usize },

    #[error("training size {n} must satisfy p < n < T (p = {order}, T = {len})")]
    TrainingTooSmall { n: usize, order: usize, len: usize },

    #[error("numerical underflow: {0}")]
    NumericalUnderflow(String),

    #[error("posterior mean of rho {0:?} is nonstationary and could not be projected")]
    NonStationaryMean(Vec<f64>),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input or configuration.
    Input,
    /// Filesystem or (de)serialization failure.
    Io,
    /// The numerics broke down on otherwise valid input.
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonStationary(_)
            | Error::LengthMismatch { .. }
            | Error::IndexOutOfRange { .. }
            | Error::InvalidSpec(_)
            | Error::ConfigInvalid(_)
            | Error::TrainingTooSmall { .. }
            | Error::InvalidScenario(_)
            | Error::InvalidData(_)
            | Error::ChainTooShort { .. }
            | Error::EmptyChain => ErrorKind::Input,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorKind::Io,
            Error::NonPositiveVariance(_)
            | Error::NotPositiveDefinite
            | Error::SingularDesign
            | Error::DegenerateResidual
            | Error::DegenerateVariance(_)
            | Error::NumericalUnderflow(_)
            | Error::NonStationaryMean(_) => ErrorKind::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
