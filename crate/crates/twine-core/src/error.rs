use thiserror::Error;

/// Errors produced by twine-core operations.
#[derive(Debug, Error)]
pub enum TwineError {
    #[error("unsupported value in canonical serialization: {0}")]
    UnsupportedValue(String),
    #[error("malformed canonical bytes at offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported hash algorithm code {0:#x}")]
    UnsupportedAlgorithm(u64),
    #[error("malformed CID: {0}")]
    BadCid(String),
    #[error("links_radix must be >= 2, got {0}")]
    InvalidRadix(u64),
    #[error("signing failed: {0}")]
    SigningFailure(String),
    #[error("previous pulse belongs to a different chain")]
    HeadMismatch,
    #[error("resolver is missing a required record: {0}")]
    ResolverMiss(String),
    #[error("resolver unavailable: {0}")]
    ResolverUnavailable(String),
    #[error("record field {0} is missing or has the wrong type")]
    BadField(&'static str),
}

pub type Result<T> = std::result::Result<T, TwineError>;
