use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency {omega} rad/s lies on the bare mechanical pole at {pole} rad/s")]
    Pole { omega: f64, pole: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid frequency grid: {0}")]
    Grid(String),

    #[error("length mismatch: {0}")]
    Length(String),

    #[error("config: {0}")]
    Config(String),

    #[error("no frequency bins left in band {lo_hz}..{hi_hz} Hz")]
    EmptyBand { lo_hz: f64, hi_hz: f64 },

    #[error("minimizer did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("Welch estimate needs at least 2 segments, got {0}")]
    InsufficientSegments(usize),

    #[error("carrier magnitude {magnitude:.3e} below tracking floor {floor:.3e}")]
    CarrierTooWeak { magnitude: f64, floor: f64 },

    #[error("calibration reference is near zero at bin {bin} ({freq_hz} Hz)")]
    ReferenceNearZero { bin: usize, freq_hz: f64 },

    #[error("trace format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
