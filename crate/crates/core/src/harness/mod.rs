//! Headless client: trace replay, bandwidth shaping, the ABR loop and
//! per-frame session logs.

mod report;
mod session;
mod shaper;
mod trace;
mod transport;

pub use report::{export_session_report, load_session, median, percentile, summarize, switch_count, SessionSummary};
pub use session::{
    run_session, FrameRecord, SampledFrame, SessionLog, SessionOptions, DEFAULT_SAMPLE_STRIDE, VIRTUAL_RTT_S,
};
pub use shaper::{default_bucket, TokenBucketShaper};
pub use trace::{BandwidthEntry, BandwidthTrace, MovementEntry, MovementTrace};
pub use transport::{FrameTransport, H1Client, H3Client};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamps must strictly increase")]
    NonMonotonicTime { line: usize },
    #[error("trace has no entries")]
    EmptyTrace,
    #[error("session log has no records")]
    EmptyLog,
    #[error("server unreachable: {0}")]
    ServerUnreachable(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
