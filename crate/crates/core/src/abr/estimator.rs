use std::collections::VecDeque;

use super::AbrError;

pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_HISTORY: usize = 5;

/// Exponential moving average over per-request throughput samples.
///
/// Instantaneous throughput is `size / duration` in bytes per second. The
/// first sample seeds the average; later ones fold in with weight `alpha`.
/// The last `history` raw samples are kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputEstimator {
    history: VecDeque<f64>,
    capacity: usize,
    alpha: f64,
    ema: Option<f64>,
}

impl Default for ThroughputEstimator {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA, DEFAULT_HISTORY)
    }
}

impl ThroughputEstimator {
    pub fn new(alpha: f64, history: usize) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
        Self {
            history: VecDeque::with_capacity(history.max(1)),
            capacity: history.max(1),
            alpha,
            ema: None,
        }
    }

    /// Records one response. Invalid samples leave the estimator unchanged.
    pub fn record_sample(&mut self, size_bytes: u64, duration: f64) -> Result<f64, AbrError> {
        if size_bytes == 0 || !(duration > 0.0 && duration.is_finite()) {
            return Err(AbrError::InvalidSample { size_bytes, duration });
        }
        let rate = size_bytes as f64 / duration;
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(rate);
        let ema = match self.ema {
            None => rate,
            Some(prev) => self.alpha * rate + (1.0 - self.alpha) * prev,
        };
        self.ema = Some(ema);
        Ok(ema)
    }

    /// Smoothed throughput in bytes per second, once a sample exists.
    pub fn ema(&self) -> Option<f64> {
        self.ema
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sample_count(&self) -> usize {
        self.history.len()
    }
}
