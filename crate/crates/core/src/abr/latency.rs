use serde::{Deserialize, Serialize};

use super::{AbrError, BitrateLadder, QualityProfile, ThroughputEstimator};
use crate::camera::CameraPose;

/// Angular speed above which a pose change counts as panning, degrees/frame.
pub const PANNING_THRESHOLD_DEG: f64 = 5.0;

/// Expected delivery time of a rung at the given throughput (bytes/s).
pub fn predict_time(profile: &QualityProfile, throughput: f64) -> f64 {
    profile.expected_size_bytes / throughput
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbrConfig {
    pub t_target: f64,
    pub t_margin: f64,
    /// Identical consecutive candidates needed before a switch.
    pub hold: u32,
    /// Consecutive over-margin requests that make a downgrade candidate.
    pub over_margin_needed: u32,
}

impl Default for AbrConfig {
    fn default() -> Self {
        Self { t_target: 0.100, t_margin: 0.150, hold: 3, over_margin_needed: 2 }
    }
}

impl AbrConfig {
    pub fn validate(&self) -> Result<(), AbrError> {
        if !(self.t_target > 0.0 && self.t_target < self.t_margin && self.t_margin.is_finite()) {
            return Err(AbrError::InvalidConfig(format!(
                "need 0 < t_target < t_margin, got {} and {}",
                self.t_target, self.t_margin
            )));
        }
        if self.hold == 0 || self.over_margin_needed == 0 {
            return Err(AbrError::InvalidConfig("hold and over-margin counts must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// What the client observed about the request that just completed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub last_request_time: f64,
    pub panning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub level: usize,
    pub switched: bool,
    pub candidate: Option<usize>,
    pub hold_counter: u32,
}

/// Controller state for one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbrState {
    pub current_level: usize,
    pub hold_counter: u32,
    pub pending: Option<usize>,
    pub consecutive_over_margin: u32,
}

impl AbrState {
    pub fn new(level: usize) -> Self {
        Self { current_level: level, hold_counter: 0, pending: None, consecutive_over_margin: 0 }
    }

    /// One decision step. Downgrade candidates win over upgrade candidates.
    pub fn decide(
        &mut self,
        cfg: &AbrConfig,
        ladder: &BitrateLadder,
        est: &ThroughputEstimator,
        obs: Observation,
    ) -> Decision {
        let worst = ladder.worst_level();
        self.current_level = self.current_level.min(worst);
        let level = self.current_level;

        if obs.last_request_time > cfg.t_margin {
            self.consecutive_over_margin += 1;
        } else {
            self.consecutive_over_margin = 0;
        }

        let downgrade = level < worst && self.consecutive_over_margin >= cfg.over_margin_needed;
        let candidate = if downgrade {
            Some(level + 1)
        } else if level > 0 {
            est.ema()
                .filter(|r| predict_time(ladder.profile(level - 1), *r) <= cfg.t_target)
                .map(|_| level - 1)
        } else {
            None
        };

        let Some(target) = candidate else {
            self.pending = None;
            self.hold_counter = 0;
            return self.decision(None, false);
        };

        if downgrade && obs.panning {
            let to = est
                .ema()
                .and_then(|r| {
                    (level + 1..=worst)
                        .find(|&l| predict_time(ladder.profile(l), r) <= cfg.t_target)
                })
                .unwrap_or(worst);
            return self.switch_to(to, Some(target));
        }

        if self.pending == Some(target) {
            self.hold_counter += 1;
        } else {
            self.pending = Some(target);
            self.hold_counter = 1;
        }
        if self.hold_counter >= cfg.hold {
            self.switch_to(target, Some(target))
        } else {
            self.decision(Some(target), false)
        }
    }

    fn switch_to(&mut self, level: usize, candidate: Option<usize>) -> Decision {
        self.current_level = level;
        self.pending = None;
        self.hold_counter = 0;
        self.consecutive_over_margin = 0;
        self.decision(candidate, true)
    }

    fn decision(&self, candidate: Option<usize>, switched: bool) -> Decision {
        Decision {
            level: self.current_level,
            switched,
            candidate,
            hold_counter: self.hold_counter,
        }
    }
}

/// A per-frame rung selection policy.
pub trait AbrPolicy: Send {
    fn name(&self) -> &str;
    fn level(&self) -> usize;
    fn decide(
        &mut self,
        ladder: &BitrateLadder,
        est: &ThroughputEstimator,
        obs: Observation,
    ) -> Decision;
}

/// Latency-targeting controller with deadband, hold counter and panning bypass.
#[derive(Debug, Clone)]
pub struct LatencyAbr {
    pub config: AbrConfig,
    pub state: AbrState,
}

impl LatencyAbr {
    pub fn new(config: AbrConfig, initial_level: usize) -> Result<Self, AbrError> {
        config.validate()?;
        Ok(Self { config, state: AbrState::new(initial_level) })
    }
}

impl AbrPolicy for LatencyAbr {
    fn name(&self) -> &str {
        "latency"
    }

    fn level(&self) -> usize {
        self.state.current_level
    }

    fn decide(
        &mut self,
        ladder: &BitrateLadder,
        est: &ThroughputEstimator,
        obs: Observation,
    ) -> Decision {
        self.state.decide(&self.config, ladder, est, obs)
    }
}

/// Pins one rung. Used when adaptation is switched off.
#[derive(Debug, Clone)]
pub struct FixedLevel(pub usize);

impl AbrPolicy for FixedLevel {
    fn name(&self) -> &str {
        "fixed"
    }

    fn level(&self) -> usize {
        self.0
    }

    fn decide(&mut self, ladder: &BitrateLadder, _: &ThroughputEstimator, _: Observation) -> Decision {
        self.0 = self.0.min(ladder.worst_level());
        Decision { level: self.0, switched: false, candidate: None, hold_counter: 0 }
    }
}

/// Ladder, estimator and policy bundled the way a streaming client drives them.
pub struct ClientAbr {
    pub ladder: BitrateLadder,
    pub estimator: ThroughputEstimator,
    policy: Box<dyn AbrPolicy>,
}

impl ClientAbr {
    pub fn new(ladder: BitrateLadder, policy: Box<dyn AbrPolicy>) -> Self {
        Self { ladder, estimator: ThroughputEstimator::default(), policy }
    }

    /// Latency controller with default thresholds, starting at the cheapest rung.
    pub fn latency(ladder: BitrateLadder) -> Self {
        let start = ladder.worst_level();
        let policy = LatencyAbr::new(AbrConfig::default(), start).expect("default config");
        Self::new(ladder, Box::new(policy))
    }

    pub fn policy_name(&self) -> &str {
        self.policy.name()
    }

    pub fn level(&self) -> usize {
        self.policy.level().min(self.ladder.worst_level())
    }

    pub fn profile(&self) -> &QualityProfile {
        self.ladder.profile(self.level())
    }

    /// Feeds one completed response fetched at the current level and returns
    /// the level for the next request. `duration` is the transfer time used
    /// for the throughput sample; `request_time` is the end-to-end latency.
    pub fn on_response(
        &mut self,
        size_bytes: u64,
        duration: f64,
        request_time: f64,
        panning: bool,
    ) -> Result<Decision, AbrError> {
        self.estimator.record_sample(size_bytes, duration)?;
        let level = self.level();
        self.ladder.update_expected_size(level, size_bytes)?;
        Ok(self.policy.decide(
            &self.ladder,
            &self.estimator,
            Observation { last_request_time: request_time, panning },
        ))
    }
}

/// Flags rapid view rotation from the last two poses.
#[derive(Debug, Clone, Default)]
pub struct PanningDetector {
    previous: Option<(f64, f64)>,
    threshold_deg: Option<f64>,
}

impl PanningDetector {
    pub fn new(threshold_deg: f64) -> Self {
        Self { previous: None, threshold_deg: Some(threshold_deg) }
    }

    pub fn observe(&mut self, pose: &CameraPose) -> bool {
        let now = (pose.azimuth_deg(), pose.elevation_deg());
        let threshold = self.threshold_deg.unwrap_or(PANNING_THRESHOLD_DEG);
        let panning = self.previous.is_some_and(|(az, el)| {
            let mut daz = (now.0 - az).rem_euclid(360.0);
            if daz > 180.0 {
                daz = 360.0 - daz;
            }
            daz + (now.1 - el).abs() > threshold
        });
        self.previous = Some(now);
        panning
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est_with(rate: f64) -> ThroughputEstimator {
        let mut e = ThroughputEstimator::default();
        e.record_sample(rate as u64, 1.0).unwrap();
        e
    }

    fn obs(t: f64, panning: bool) -> Observation {
        Observation { last_request_time: t, panning }
    }

    #[test]
    fn predict_examples() {
        let p = QualityProfile {
            level: 0,
            width: 1,
            height: 1,
            jpeg_quality: 50,
            expected_size_bytes: 102_400.0,
        };
        assert!((predict_time(&p, 1_024_000.0) - 0.1).abs() < 1e-15);
        assert_eq!(predict_time(&QualityProfile { expected_size_bytes: 0.0, ..p }, 5.0), 0.0);
        assert_eq!(predict_time(&p, 2_048_000.0), predict_time(&p, 1_024_000.0) / 2.0);
    }

    #[test]
    fn upgrade_waits_for_hold() {
        let ladder = BitrateLadder::default();
        // T̃(level 2) = 20000 / 400000 = 0.05 s
        let est = est_with(400_000.0);
        let cfg = AbrConfig::default();
        let mut s = AbrState::new(3);
        let levels: Vec<_> = (0..3).map(|_| s.decide(&cfg, &ladder, &est, obs(0.05, false)).level).collect();
        assert_eq!(levels, [3, 3, 2]);
    }

    #[test]
    fn downgrade_with_and_without_panning() {
        let ladder = BitrateLadder::default();
        let est = est_with(1_000_000.0);
        let cfg = AbrConfig::default();

        let mut s = AbrState::new(0);
        let levels: Vec<_> = (0..4).map(|_| s.decide(&cfg, &ladder, &est, obs(0.2, false)).level).collect();
        assert_eq!(levels, [0, 0, 0, 1]);

        let mut s = AbrState::new(0);
        assert_eq!(s.decide(&cfg, &ladder, &est, obs(0.2, true)).level, 0);
        let d = s.decide(&cfg, &ladder, &est, obs(0.2, true));
        assert!(d.switched);
        // First worse rung meeting the target: T̃(1) = 0.055 s.
        assert_eq!(d.level, 1);
    }

    #[test]
    fn panning_drop_skips_rungs() {
        let ladder = BitrateLadder::default();
        // T̃(1) = 0.55, T̃(2) = 0.2, T̃(3) = 0.07
        let est = est_with(100_000.0);
        let cfg = AbrConfig::default();
        let mut s = AbrState::new(0);
        s.decide(&cfg, &ladder, &est, obs(0.3, true));
        assert_eq!(s.decide(&cfg, &ladder, &est, obs(0.3, true)).level, 3);
    }

    #[test]
    fn panning_never_speeds_upgrades() {
        let ladder = BitrateLadder::default();
        let est = est_with(10_000_000.0);
        let cfg = AbrConfig::default();
        let mut s = AbrState::new(3);
        let levels: Vec<_> = (0..3).map(|_| s.decide(&cfg, &ladder, &est, obs(0.01, true)).level).collect();
        assert_eq!(levels, [3, 3, 2]);
    }

    #[test]
    fn compliant_request_resets_downgrade() {
        let ladder = BitrateLadder::default();
        let est = est_with(1_000_000.0);
        let cfg = AbrConfig::default();
        let mut s = AbrState::new(0);
        for t in [0.2, 0.2, 0.2, 0.12, 0.2, 0.2, 0.2] {
            assert_eq!(s.decide(&cfg, &ladder, &est, obs(t, false)).level, 0, "t = {t}");
        }
        assert_eq!(s.decide(&cfg, &ladder, &est, obs(0.2, false)).level, 1);
    }

    #[test]
    fn deadband_holds() {
        let ladder = BitrateLadder::default();
        // At level 1, T̃(0) = 240000 / 458333 ≈ 0.52 s; requests take 0.12 s.
        let est = est_with(458_333.0);
        let cfg = AbrConfig::default();
        let mut s = AbrState::new(1);
        for _ in 0..100 {
            let d = s.decide(&cfg, &ladder, &est, obs(0.12, false));
            assert_eq!(d.level, 1);
            assert!(!d.switched);
        }
    }

    #[test]
    fn bounds() {
        let ladder = BitrateLadder::default();
        let cfg = AbrConfig::default();
        let mut s = AbrState::new(3);
        for _ in 0..10 {
            assert_eq!(s.decide(&cfg, &ladder, &est_with(1.0), obs(9.0, true)).level, 3);
        }
        let mut s = AbrState::new(0);
        for _ in 0..10 {
            assert_eq!(s.decide(&cfg, &ladder, &est_with(1e12), obs(0.0, false)).level, 0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(AbrConfig::default().validate().is_ok());
        let bad = AbrConfig { t_target: 0.2, t_margin: 0.2, ..Default::default() };
        assert!(matches!(bad.validate(), Err(AbrError::InvalidConfig(_))));
    }

    #[test]
    fn panning_detector() {
        let mut p = PanningDetector::default();
        assert!(!p.observe(&CameraPose::from_degrees(0.0, 0.0, [0.0; 3])));
        assert!(!p.observe(&CameraPose::from_degrees(3.0, 1.0, [0.0; 3])));
        assert!(p.observe(&CameraPose::from_degrees(7.0, 3.0, [0.0; 3])));
        assert!(!p.observe(&CameraPose::from_degrees(7.0, 3.0, [1.0, 0.0, 0.0])));
    }

    #[test]
    fn client_updates_sizes_and_level() {
        let mut c = ClientAbr::latency(BitrateLadder::default());
        assert_eq!(c.level(), 3);
        c.on_response(5_000, 0.01, 0.02, false).unwrap();
        assert_eq!(c.ladder.profile(3).expected_size_bytes, 6_600.0);
        assert!(c.on_response(5_000, 0.0, 0.0, false).is_err());
        assert_eq!(c.estimator.sample_count(), 1);
    }
}
