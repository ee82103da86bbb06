use thiserror::Error;

/// Errors raised by the simulator building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tone frequency {freq} Hz is not below Nyquist ({nyquist} Hz)")]
    AboveNyquist { freq: f64, nyquist: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("window [{start}, {end}) lies outside a waveform of {len} samples")]
    WindowOutOfBounds { start: usize, end: usize, len: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: f64, right: f64 },
    #[error("negative optical intensity {value} at sample {index}")]
    NegativeIntensity { index: usize, value: f64 },
    #[error("duty fractions sum to {sum}, expected 1")]
    DutySum { sum: f64 },
    #[error("unknown command id {0}")]
    UnknownCommand(u32),
    #[error("metric grid is incomplete: {0}")]
    IncompleteGrid(String),
    #[error("no frame was located in the capture")]
    NoFrame,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
