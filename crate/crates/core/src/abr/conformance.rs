//! Golden decision traces shared with other client implementations.
//!
//! Each trace is replayed through [`ClientAbr::latency`]: for every sample the
//! estimator records `(size_bytes, duration_s)`, the current rung's expected
//! size is refined, and the controller decides with
//! `last_request_time = duration_s`. `expected_levels[i]` is the level chosen
//! after sample `i`.

use serde::{Deserialize, Serialize};

use super::{AbrConfig, AbrError, BitrateLadder, ClientAbr, LatencyAbr, Rung};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformanceSample {
    pub size_bytes: u64,
    pub duration_s: f64,
    pub panning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceTrace {
    pub name: String,
    pub initial_level: usize,
    pub ladder: Vec<Rung>,
    pub t_target: f64,
    pub t_margin: f64,
    pub samples: Vec<ConformanceSample>,
    pub expected_levels: Vec<usize>,
}

fn rungs(ladder: &BitrateLadder) -> Vec<Rung> {
    ladder
        .profiles()
        .iter()
        .map(|p| Rung {
            width: p.width,
            height: p.height,
            jpeg_quality: p.jpeg_quality,
            expected_kb: p.expected_size_bytes / 1000.0,
        })
        .collect()
}

/// Runs the samples of a trace and returns the chosen level after each one.
pub fn replay(trace: &ConformanceTrace) -> Result<Vec<usize>, AbrError> {
    let ladder = BitrateLadder::from_rungs(&trace.ladder)?;
    let config = AbrConfig { t_target: trace.t_target, t_margin: trace.t_margin, ..Default::default() };
    let policy = LatencyAbr::new(config, trace.initial_level)?;
    let mut abr = ClientAbr::new(ladder, Box::new(policy));
    trace
        .samples
        .iter()
        .map(|s| {
            abr.on_response(s.size_bytes, s.duration_s, s.duration_s, s.panning)
                .map(|d| d.level)
        })
        .collect()
}

/// Closed-loop simulation: each request returns `sizes[level]` bytes over a
/// link whose rate (bytes/s) at step `i` is `rate(i)`.
fn simulate(
    name: &str,
    initial_level: usize,
    steps: usize,
    sizes: [u64; 4],
    rate: impl Fn(usize) -> f64,
    panning: impl Fn(usize) -> bool,
) -> ConformanceTrace {
    let ladder = BitrateLadder::default();
    let config = AbrConfig::default();
    let mut abr = ClientAbr::new(
        ladder.clone(),
        Box::new(LatencyAbr::new(config, initial_level).expect("default config")),
    );
    let mut samples = Vec::with_capacity(steps);
    let mut levels = Vec::with_capacity(steps);
    for i in 0..steps {
        let size = sizes[abr.level()];
        let duration = size as f64 / rate(i);
        let sample = ConformanceSample { size_bytes: size, duration_s: duration, panning: panning(i) };
        let d = abr
            .on_response(size, duration, duration, sample.panning)
            .expect("simulated samples are valid");
        samples.push(sample);
        levels.push(d.level);
    }
    ConformanceTrace {
        name: name.into(),
        initial_level,
        ladder: rungs(&ladder),
        t_target: config.t_target,
        t_margin: config.t_margin,
        samples,
        expected_levels: levels,
    }
}

fn scripted(name: &str, initial_level: usize, samples: Vec<ConformanceSample>) -> ConformanceTrace {
    let ladder = BitrateLadder::default();
    let config = AbrConfig::default();
    let mut trace = ConformanceTrace {
        name: name.into(),
        initial_level,
        ladder: rungs(&ladder),
        t_target: config.t_target,
        t_margin: config.t_margin,
        samples,
        expected_levels: Vec::new(),
    };
    trace.expected_levels = replay(&trace).expect("scripted samples are valid");
    trace
}

const NOMINAL: [u64; 4] = [240_000, 55_000, 20_000, 7_000];

/// The fixed suite of decision traces.
pub fn golden_traces() -> Vec<ConformanceTrace> {
    let sample = |size_bytes, duration_s, panning| ConformanceSample { size_bytes, duration_s, panning };
    vec![
        simulate("constant-fast-link", 3, 40, NOMINAL, |_| 4_000_000.0, |_| false),
        simulate("constant-medium-link", 3, 40, NOMINAL, |_| 400_000.0, |_| false),
        simulate("constant-slow-link", 0, 40, NOMINAL, |_| 60_000.0, |_| false),
        scripted("upgrade-hold", 3, vec![sample(7_000, 0.005, false); 6]),
        scripted(
            "upgrade-hold-interrupted",
            3,
            vec![
                sample(7_000, 0.03, false),
                sample(7_000, 0.03, false),
                sample(7_000, 0.07, false),
                sample(7_000, 0.03, false),
                sample(7_000, 0.03, false),
                sample(7_000, 0.03, false),
            ],
        ),
        scripted("deadband", 1, vec![sample(55_000, 0.12, false); 100]),
        scripted("downgrade-hold", 0, vec![sample(240_000, 0.2, false); 5]),
        scripted("downgrade-panning", 0, vec![sample(240_000, 0.2, true); 3]),
        scripted(
            "panning-does-not-bypass-upgrade",
            3,
            vec![sample(7_000, 0.005, true); 4],
        ),
        simulate(
            "bandwidth-step-down",
            3,
            80,
            NOMINAL,
            |i| if i < 40 { 625_000.0 } else { 62_500.0 },
            |_| false,
        ),
        simulate(
            "panning-burst",
            1,
            30,
            NOMINAL,
            |i| if (10..20).contains(&i) { 90_000.0 } else { 600_000.0 },
            |i| (10..20).contains(&i),
        ),
    ]
}
