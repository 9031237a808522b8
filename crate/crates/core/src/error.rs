use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("curve is not immersed: |c'(s)| = {speed:e} at s = {s}")]
    Immersion { s: f64, speed: f64 },

    #[error("curve `{label}` self-intersects")]
    NotSimple { label: String },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("offset t = {t} leaves the Fermi chart (r_max = {r_max})")]
    ChartExceeded { t: f64, r_max: f64 },

    #[error("empty source component set")]
    EmptySource,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("single-layer matrix is numerically singular: {0}")]
    Conditioning(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("point too close to the boundary for accurate quadrature: {0}")]
    Accuracy(String),

    #[error("t = {t} is beyond the upper-bound validity radius {epsilon0}")]
    OutOfValidity { t: f64, epsilon0: f64 },

    #[error("reference boundary norm is zero")]
    ZeroReference,

    #[error("undefined eigenpair: {0}")]
    Undefined(String),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Immersion { .. } => "immersion",
            Error::NotSimple { .. } => "not_simple",
            Error::InvalidDomain(_) => "invalid_domain",
            Error::ChartExceeded { .. } => "chart_exceeded",
            Error::EmptySource => "empty_source",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Conditioning(_) => "conditioning",
            Error::Eigensolver(_) => "eigensolver",
            Error::Evaluation(_) => "evaluation",
            Error::Accuracy(_) => "accuracy",
            Error::OutOfValidity { .. } => "out_of_validity",
            Error::ZeroReference => "zero_reference",
            Error::Undefined(_) => "undefined",
        }
    }
}
