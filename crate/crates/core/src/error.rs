use thiserror::Error;

use crate::series::Segment;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("sample too small: n = {n}, need n >= {n_min} (2*v_n < n and u_n >= d + 1)")]
    SampleTooSmall { n: usize, n_min: usize },

    #[error("invalid segment [{lo}, {hi}] for series of length {n}")]
    InvalidSegment { lo: usize, hi: usize, n: usize },

    #[error("segment {segment} too short: {len} points, need at least {min}")]
    SegmentTooShort {
        segment: Segment,
        len: usize,
        min: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown model family '{0}'")]
    UnknownModel(String),

    #[error("invalid model specification: {0}")]
    InvalidModel(String),

    #[error("intensity {value} below floor {floor} in component {component}")]
    IntensityBelowFloor {
        component: usize,
        value: f64,
        floor: f64,
    },

    #[error("covariance matrix is singular or not positive definite (det = {det})")]
    SingularCovariance { det: f64 },

    #[error("singular regression design on segment {0}")]
    SingularDesign(Segment),

    #[error("matrix irrecoverably singular after ridge escalation up to {epsilon}")]
    IrrecoverablySingular { epsilon: f64 },

    #[error("{failed} of {total} segment fits did not converge")]
    ScanDiverged { failed: usize, total: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("critical value cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
