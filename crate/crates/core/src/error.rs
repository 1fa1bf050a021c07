//! Error type shared by all analysis modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("record {index}: timestamp {t_abs} ps precedes the previous record")]
    NonMonotonic { index: usize, t_abs: u64 },

    #[error("record {index}: channel {channel} outside the declared {n_channels} channel(s)")]
    BadChannel {
        index: usize,
        channel: u8,
        n_channels: u16,
    },

    #[error("record {index}: timestamp {t_abs} ps exceeds stream duration {duration} ps")]
    BeyondDuration {
        index: usize,
        t_abs: u64,
        duration: u64,
    },

    #[error("operation requires a pulsed stream: {0}")]
    UnsupportedMode(String),

    #[error("stream has no records on channel {0}")]
    MissingChannel(u8),

    #[error("invalid background window: {0}")]
    InvalidWindow(String),

    #[error("correlation range too short: {0}")]
    InsufficientRange(String),

    #[error("histogram stage mismatch: expected {expected}, got {got}")]
    WrongStage {
        expected: &'static str,
        got: &'static str,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("spectrum shape not usable: {0}")]
    Shape(String),

    #[error("invalid emitter model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidInput(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
