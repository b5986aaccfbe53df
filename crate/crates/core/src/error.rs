use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame length must be at least 1 codeword")]
    ZeroFrameLength,

    #[error("capacity argument must be non-negative, got {0}")]
    NegativeCapacityArgument(f64),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// A configuration field failed validation. `field` names the offending
    /// key as it appears in the JSON config / CLI flag.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid SNR grid: {0}")]
    InvalidGrid(String),

    #[error("importance sampling requires the i.i.d. unit-variance gain model")]
    ImportanceSamplingNeedsIid,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
