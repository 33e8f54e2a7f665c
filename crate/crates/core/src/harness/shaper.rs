use super::BandwidthTrace;

const MIN_BUCKET: f64 = 1500.0;
const MAX_BUCKET: f64 = 65536.0;
const BUCKET_WINDOW_S: f64 = 0.010;

/// Default bucket depth: 10 ms worth of the current rate, at least one MTU
/// and at most 64 KiB.
pub fn default_bucket(rate_bytes_per_s: f64) -> f64 {
    (rate_bytes_per_s * BUCKET_WINDOW_S).clamp(MIN_BUCKET, MAX_BUCKET)
}

/// Token-bucket link model driven by a bandwidth trace, in virtual seconds.
#[derive(Debug, Clone)]
pub struct TokenBucketShaper {
    /// `(start_s, bytes_per_s)`, first start at zero.
    steps: Vec<(f64, f64)>,
    fixed_bucket: Option<f64>,
    tokens: f64,
    clock: f64,
}

impl TokenBucketShaper {
    /// Starts with a full bucket at time zero.
    pub fn new(trace: &BandwidthTrace) -> Self {
        let steps: Vec<_> = trace
            .entries
            .iter()
            .map(|e| (e.t_ms / 1e3, e.rate_kbps * 1000.0 / 8.0))
            .collect();
        let tokens = default_bucket(steps[0].1);
        Self { steps, fixed_bucket: None, tokens, clock: 0.0 }
    }

    /// Same, with a fixed bucket depth in bytes.
    pub fn with_bucket(trace: &BandwidthTrace, bucket: f64) -> Self {
        let mut s = Self::new(trace);
        s.fixed_bucket = Some(bucket.max(0.0));
        s.tokens = s.fixed_bucket.unwrap();
        s
    }

    /// Rate in bytes/s at `t` and the time of the next rate change.
    pub fn rate_at(&self, t: f64) -> (f64, Option<f64>) {
        let i = self.steps.partition_point(|&(start, _)| start <= t).max(1) - 1;
        (self.steps[i].1, self.steps.get(i + 1).map(|s| s.0))
    }

    pub fn bucket_at(&self, t: f64) -> f64 {
        self.fixed_bucket.unwrap_or_else(|| default_bucket(self.rate_at(t).0))
    }

    pub fn tokens(&self) -> f64 {
        self.tokens
    }

    /// Refills the bucket up to `to`, one constant-rate segment at a time.
    fn advance(&mut self, to: f64) {
        while self.clock < to {
            let (rate, next) = self.rate_at(self.clock);
            let end = next.map_or(to, |n| n.min(to));
            let cap = self.bucket_at(self.clock);
            self.tokens = (self.tokens + rate * (end - self.clock)).min(cap);
            self.clock = end;
        }
        self.tokens = self.tokens.min(self.bucket_at(self.clock));
    }

    /// Delivers `bytes` starting at `now` (or when the link frees up) and
    /// returns the completion time.
    pub fn deliver(&mut self, bytes: u64, now: f64) -> f64 {
        self.advance(now);
        let start = self.clock.max(now);
        let bytes = bytes as f64;
        if self.tokens >= bytes {
            self.tokens -= bytes;
            return start;
        }
        let mut need = bytes - self.tokens;
        self.tokens = 0.0;
        let mut t = start;
        loop {
            let (rate, next) = self.rate_at(t);
            match next {
                Some(n) if rate * (n - t) < need => {
                    need -= rate * (n - t);
                    t = n;
                }
                _ => {
                    t += need / rate;
                    break;
                }
            }
        }
        self.clock = t;
        t
    }
}
