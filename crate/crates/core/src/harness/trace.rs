use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::camera::CameraPose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementEntry {
    pub t_ms: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl MovementEntry {
    pub fn pose(&self) -> CameraPose {
        CameraPose::from_degrees(self.azimuth_deg, self.elevation_deg, [self.tx, self.ty, self.tz])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEntry {
    pub t_ms: f64,
    pub rate_kbps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovementTrace {
    pub entries: Vec<MovementEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthTrace {
    pub entries: Vec<BandwidthEntry>,
}

const MOVEMENT_HEADER: [&str; 6] = ["t_ms", "azimuth_deg", "elevation_deg", "tx", "ty", "tz"];
const BANDWIDTH_HEADER: [&str; 2] = ["t_ms", "rate_kbps"];

/// Reads rows of `T`, reporting 1-based file line numbers.
fn read_rows<T: for<'de> Deserialize<'de>>(
    reader: impl Read,
    header: &[&str],
) -> Result<Vec<(usize, T)>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| HarnessError::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(HarnessError::Parse {
            line: 1,
            message: format!("expected header {}, found {}", header.join(","), found.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| HarnessError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: T = record
            .deserialize(None)
            .map_err(|e| HarnessError::Parse { line, message: e.to_string() })?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn check_times(times: impl Iterator<Item = (usize, f64)>) -> Result<(), HarnessError> {
    let mut prev: Option<f64> = None;
    for (line, t) in times {
        if !t.is_finite() {
            return Err(HarnessError::Parse { line, message: "t_ms must be finite".into() });
        }
        if prev.is_some_and(|p| t <= p) {
            return Err(HarnessError::NonMonotonicTime { line });
        }
        prev = Some(t);
    }
    Ok(())
}

impl MovementTrace {
    pub fn new(entries: Vec<MovementEntry>) -> Result<Self, HarnessError> {
        if entries.is_empty() {
            return Err(HarnessError::EmptyTrace);
        }
        check_times(entries.iter().enumerate().map(|(i, e)| (i + 2, e.t_ms)))?;
        for (i, e) in entries.iter().enumerate() {
            if !e.pose().is_finite() {
                return Err(HarnessError::Parse { line: i + 2, message: "pose must be finite".into() });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, HarnessError> {
        let rows: Vec<(usize, MovementEntry)> = read_rows(reader, &MOVEMENT_HEADER)?;
        if rows.is_empty() {
            return Err(HarnessError::EmptyTrace);
        }
        check_times(rows.iter().map(|(l, e)| (*l, e.t_ms)))?;
        Self::new(rows.into_iter().map(|(_, e)| e).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write(&self, writer: impl Write) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        self.write(std::fs::File::create(path)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Circular orbit around the origin at `radius`, looking inward, sweeping
    /// `degrees` of azimuth over `n` frames spaced `dt_ms` apart.
    pub fn orbit(n: usize, dt_ms: f64, radius: f64, degrees: f64) -> Self {
        let entries = (0..n)
            .map(|i| {
                let az = degrees * i as f64 / n.max(1) as f64;
                let (s, c) = az.to_radians().sin_cos();
                MovementEntry {
                    t_ms: i as f64 * dt_ms,
                    azimuth_deg: az,
                    elevation_deg: 0.0,
                    tx: -radius * s,
                    ty: 0.0,
                    tz: -radius * c,
                }
            })
            .collect();
        Self::new(entries).expect("orbit is well formed")
    }
}

impl BandwidthTrace {
    pub fn new(entries: Vec<BandwidthEntry>) -> Result<Self, HarnessError> {
        let Some(first) = entries.first() else {
            return Err(HarnessError::EmptyTrace);
        };
        if first.t_ms != 0.0 {
            return Err(HarnessError::Parse { line: 2, message: "first entry must start at t_ms = 0".into() });
        }
        check_times(entries.iter().enumerate().map(|(i, e)| (i + 2, e.t_ms)))?;
        for (i, e) in entries.iter().enumerate() {
            if !(e.rate_kbps > 0.0 && e.rate_kbps.is_finite()) {
                return Err(HarnessError::Parse { line: i + 2, message: "rate_kbps must be positive".into() });
            }
        }
        Ok(Self { entries })
    }

    /// Constant rate from time zero.
    pub fn constant(rate_kbps: f64) -> Self {
        Self::new(vec![BandwidthEntry { t_ms: 0.0, rate_kbps }]).expect("positive rate")
    }

    /// `before_kbps` until `at_ms`, then `after_kbps`.
    pub fn step(before_kbps: f64, after_kbps: f64, at_ms: f64) -> Self {
        Self::new(vec![
            BandwidthEntry { t_ms: 0.0, rate_kbps: before_kbps },
            BandwidthEntry { t_ms: at_ms, rate_kbps: after_kbps },
        ])
        .expect("valid step trace")
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, HarnessError> {
        let rows: Vec<(usize, BandwidthEntry)> = read_rows(reader, &BANDWIDTH_HEADER)?;
        if rows.is_empty() {
            return Err(HarnessError::EmptyTrace);
        }
        check_times(rows.iter().map(|(l, e)| (*l, e.t_ms)))?;
        if let Some((line, e)) = rows.iter().find(|(_, e)| !(e.rate_kbps > 0.0 && e.rate_kbps.is_finite())) {
            return Err(HarnessError::Parse {
                line: *line,
                message: format!("rate_kbps must be positive, got {}", e.rate_kbps),
            });
        }
        Self::new(rows.into_iter().map(|(_, e)| e).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write(&self, writer: impl Write) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        self.write(std::fs::File::create(path)?)
    }
}
