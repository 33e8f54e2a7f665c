//! Client-side adaptation: throughput estimation, the bitrate ladder and
//! the latency-targeting controller.

mod conformance;
mod estimator;
mod ladder;
mod latency;

pub use conformance::{golden_traces, replay, ConformanceSample, ConformanceTrace};
pub use estimator::{ThroughputEstimator, DEFAULT_ALPHA, DEFAULT_HISTORY};
pub use ladder::{BitrateLadder, QualityProfile, Rung, MIN_EXPECTED_SIZE};
pub use latency::{
    predict_time, AbrConfig, AbrPolicy, AbrState, ClientAbr, Decision, FixedLevel, LatencyAbr,
    Observation, PanningDetector, PANNING_THRESHOLD_DEG,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AbrError {
    #[error("invalid throughput sample: {size_bytes} bytes in {duration} s")]
    InvalidSample { size_bytes: u64, duration: f64 },
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("level {level} outside ladder of {len} rungs")]
    InvalidLevel { level: usize, len: usize },
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("ladder file: {0}")]
    Io(#[from] std::io::Error),
}
