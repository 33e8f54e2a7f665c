use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AbrError;

/// Lower bound for a rung's expected size, in bytes.
pub const MIN_EXPECTED_SIZE: f64 = 1024.0;

/// Weight of a new observation in the per-rung size average.
const SIZE_EMA_WEIGHT: f64 = 0.2;

/// One rung of the ladder. Level 0 is the best quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityProfile {
    pub level: usize,
    pub width: u32,
    pub height: u32,
    pub jpeg_quality: u8,
    pub expected_size_bytes: f64,
}

/// Rung as written in a ladder file, best quality first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub width: u32,
    pub height: u32,
    pub jpeg_quality: u8,
    /// Expected frame size in kilobytes (1 KB = 1000 bytes).
    pub expected_kb: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LadderFile {
    rung: Vec<Rung>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitrateLadder {
    profiles: Vec<QualityProfile>,
}

impl Default for BitrateLadder {
    /// Four rungs from 1280×720 @ 90 down to 320×180 @ 10, sized at the
    /// midpoints of their typical frame-size ranges.
    fn default() -> Self {
        Self::from_rungs(&[
            Rung { width: 1280, height: 720, jpeg_quality: 90, expected_kb: 240.0 },
            Rung { width: 960, height: 540, jpeg_quality: 65, expected_kb: 55.0 },
            Rung { width: 640, height: 360, jpeg_quality: 35, expected_kb: 20.0 },
            Rung { width: 320, height: 180, jpeg_quality: 10, expected_kb: 7.0 },
        ])
        .expect("default ladder is valid")
    }
}

impl BitrateLadder {
    pub fn from_rungs(rungs: &[Rung]) -> Result<Self, AbrError> {
        if rungs.len() < 2 {
            return Err(AbrError::InvalidLadder("at least two rungs required".into()));
        }
        let profiles: Vec<_> = rungs
            .iter()
            .enumerate()
            .map(|(level, r)| QualityProfile {
                level,
                width: r.width,
                height: r.height,
                jpeg_quality: r.jpeg_quality,
                expected_size_bytes: r.expected_kb * 1000.0,
            })
            .collect();
        for p in &profiles {
            if p.width == 0 || p.height == 0 || !(1..=100).contains(&p.jpeg_quality) {
                return Err(AbrError::InvalidLadder(format!("rung {} is degenerate", p.level)));
            }
            if !(p.expected_size_bytes > 0.0 && p.expected_size_bytes.is_finite()) {
                return Err(AbrError::InvalidLadder(format!(
                    "rung {} needs a positive expected size",
                    p.level
                )));
            }
        }
        for pair in profiles.windows(2) {
            let (better, worse) = (&pair[0], &pair[1]);
            let px = |p: &QualityProfile| u64::from(p.width) * u64::from(p.height);
            if px(better) <= px(worse) || better.expected_size_bytes <= worse.expected_size_bytes {
                return Err(AbrError::InvalidLadder(format!(
                    "rung {} must have a larger resolution and expected size than rung {}",
                    better.level, worse.level
                )));
            }
        }
        Ok(Self { profiles })
    }

    /// Reads a TOML ladder file with one `[[rung]]` table per level.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AbrError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, AbrError> {
        let file: LadderFile =
            toml::from_str(text).map_err(|e| AbrError::InvalidLadder(e.to_string()))?;
        Self::from_rungs(&file.rung)
    }

    pub fn to_toml(&self) -> String {
        let file = LadderFile {
            rung: self
                .profiles
                .iter()
                .map(|p| Rung {
                    width: p.width,
                    height: p.height,
                    jpeg_quality: p.jpeg_quality,
                    expected_kb: p.expected_size_bytes / 1000.0,
                })
                .collect(),
        };
        toml::to_string(&file).expect("ladder serializes")
    }

    pub fn profiles(&self) -> &[QualityProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Highest level number, i.e. the cheapest rung.
    pub fn worst_level(&self) -> usize {
        self.profiles.len() - 1
    }

    pub fn get(&self, level: usize) -> Option<&QualityProfile> {
        self.profiles.get(level)
    }

    pub fn profile(&self, level: usize) -> &QualityProfile {
        &self.profiles[level.min(self.worst_level())]
    }

    /// Folds an observed frame size into the rung's expected size.
    pub fn update_expected_size(&mut self, level: usize, observed_bytes: u64) -> Result<f64, AbrError> {
        let len = self.profiles.len();
        let p = self
            .profiles
            .get_mut(level)
            .ok_or(AbrError::InvalidLevel { level, len })?;
        if observed_bytes == 0 {
            return Ok(p.expected_size_bytes);
        }
        let next = (1.0 - SIZE_EMA_WEIGHT) * p.expected_size_bytes
            + SIZE_EMA_WEIGHT * observed_bytes as f64;
        p.expected_size_bytes = next.max(MIN_EXPECTED_SIZE);
        Ok(p.expected_size_bytes)
    }
}
