use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite sensor measurement")]
    SensorFault,

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("food geometry is empty")]
    EmptyGeometry,

    #[error("offsets out of sanity bounds: dx = {dx} mm, dy = {dy} mm")]
    OffsetsOutOfBounds { dx: f64, dy: f64 },

    #[error("missing landmark '{0}'")]
    MissingLandmark(String),

    #[error("degenerate landmark set")]
    DegenerateLandmarks,

    #[error("time {t} s outside plan span [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("study invalid: convergence rate {rate:.3} below 0.5")]
    StudyInvalid { rate: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
