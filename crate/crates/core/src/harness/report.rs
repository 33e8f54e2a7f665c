use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, SessionLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub frames: usize,
    pub ok_frames: usize,
    pub error_frames: usize,
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
    /// Mean over frames of `bytes * 8 / latency`, in Mbit/s.
    pub mean_bandwidth_mbps: f64,
    pub median_width: u32,
    pub median_height: u32,
    pub median_level: usize,
    pub switch_count: usize,
    pub aborted: Option<String>,
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

/// Lower median.
pub fn median<T: Copy + Ord>(values: &[T]) -> Option<T> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.get((v.len().max(1) - 1) / 2).copied()
}

/// Frames whose level differs from the previous successful frame.
pub fn switch_count(levels: &[usize]) -> usize {
    levels.windows(2).filter(|w| w[0] != w[1]).count()
}

pub fn summarize(log: &SessionLog) -> SessionSummary {
    let ok: Vec<_> = log.ok_records().collect();
    let latencies: Vec<f64> = ok.iter().map(|r| r.latency()).collect();
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let bandwidth: Vec<f64> = ok
        .iter()
        .filter(|r| r.latency() > 0.0)
        .map(|r| r.bytes as f64 * 8.0 / r.latency() / 1e6)
        .collect();
    let levels: Vec<usize> = ok.iter().map(|r| r.level).collect();
    let mut by_pixels: Vec<(u64, u32, u32)> =
        ok.iter().map(|r| (u64::from(r.width) * u64::from(r.height), r.width, r.height)).collect();
    by_pixels.sort_unstable();
    let (median_width, median_height) =
        by_pixels.get((by_pixels.len().max(1) - 1) / 2).map_or((0, 0), |&(_, w, h)| (w, h));
    SessionSummary {
        frames: log.records.len(),
        ok_frames: ok.len(),
        error_frames: log.records.len() - ok.len(),
        mean_latency_ms: mean(&latencies) * 1e3,
        p95_latency_ms: percentile(&latencies, 95.0) * 1e3,
        mean_bandwidth_mbps: mean(&bandwidth),
        median_width,
        median_height,
        median_level: median(&levels).unwrap_or(0),
        switch_count: switch_count(&levels),
        aborted: log.aborted.clone(),
    }
}

/// Writes `frames.csv`, `session.json` and `summary.json` into `dir`.
pub fn export_session_report(log: &SessionLog, dir: impl AsRef<Path>) -> Result<SessionSummary, HarnessError> {
    if log.records.is_empty() {
        return Err(HarnessError::EmptyLog);
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("frames.csv"))?;
    for r in &log.records {
        w.serialize(r)?;
    }
    w.flush()?;
    std::fs::write(dir.join("session.json"), serde_json::to_vec_pretty(log)?)?;
    let summary = summarize(log);
    std::fs::write(dir.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}

/// Reads the `session.json` written by [`export_session_report`].
pub fn load_session(dir: impl AsRef<Path>) -> Result<SessionLog, HarnessError> {
    let text = std::fs::read(dir.as_ref().join("session.json"))?;
    Ok(serde_json::from_slice(&text)?)
}
