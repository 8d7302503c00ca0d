use thiserror::Error;

/// Errors raised by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("detector half-extent {half_extent} does not cover support radius {radius}")]
    DetectorCoverage { half_extent: f64, radius: f64 },

    #[error("need at least {required} projection angles, got {got}")]
    InsufficientAngles { got: usize, required: usize },

    #[error("{0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("object leaves the support disk: {0}")]
    SupportViolation(String),

    #[error("detector grid is not symmetric about s = 0")]
    AsymmetricDetector,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is numerically rank deficient: {0}")]
    RankDeficient(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
