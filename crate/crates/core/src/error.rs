use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet size {0} is outside 2..=256")]
    InvalidAlphabet(u32),

    #[error("symbol {symbol} out of range for alphabet of size {q}")]
    SymbolOutOfRange { symbol: u32, q: u16 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("alphabet mismatch: q={left} vs q={right}")]
    AlphabetMismatch { left: u16, right: u16 },

    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid noise spec: {0}")]
    InvalidNoiseSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel exhausted after {0} uses")]
    ChannelExhausted(usize),

    #[error("unique-prefix property violated at block {block}")]
    UniquePrefixViolation { block: usize },

    #[error("noise file {path}: {reason}")]
    NoiseFormat { path: PathBuf, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Csv(_) | Error::Invariant(_) | Error::ChannelExhausted(_)
        )
    }
}
