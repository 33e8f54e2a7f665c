use std::collections::BTreeMap;
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{psnr, ssim, upscale_bilinear, MetricsError};
use crate::camera::CameraPose;
use crate::harness::{load_session, SessionLog};
use crate::model::ActivatedPrimitives;
use crate::render::{decode_image, encode_png, render_framebuffer, RenderOptions};

/// A transmitted frame paired with its lossless reference.
#[derive(Debug, Clone)]
pub struct EvalTriplet {
    pub frame_id: u64,
    pub level: usize,
    pub pose: CameraPose,
    pub transmitted: RgbImage,
    pub ground_truth: RgbImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletScore {
    pub frame_id: u64,
    pub level: usize,
    pub psnr: f64,
    pub ssim: f64,
}

impl EvalTriplet {
    /// Upscales the transmitted frame to the reference size and scores it.
    pub fn score(&self) -> Result<TripletScore, MetricsError> {
        let (w, h) = self.ground_truth.dimensions();
        let up = upscale_bilinear(&self.transmitted, w, h);
        Ok(TripletScore {
            frame_id: self.frame_id,
            level: self.level,
            psnr: psnr(&self.ground_truth, &up)?,
            ssim: ssim(&self.ground_truth, &up)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub count: usize,
    pub mean_psnr: f64,
    pub min_psnr: f64,
    pub mean_ssim: f64,
    pub min_ssim: f64,
}

impl LevelStats {
    fn of<'a>(scores: impl Iterator<Item = &'a TripletScore>) -> Option<Self> {
        let mut s = Self {
            count: 0,
            mean_psnr: 0.0,
            min_psnr: f64::INFINITY,
            mean_ssim: 0.0,
            min_ssim: f64::INFINITY,
        };
        for t in scores {
            s.count += 1;
            s.mean_psnr += t.psnr;
            s.mean_ssim += t.ssim;
            s.min_psnr = s.min_psnr.min(t.psnr);
            s.min_ssim = s.min_ssim.min(t.ssim);
        }
        if s.count == 0 {
            return None;
        }
        s.mean_psnr /= s.count as f64;
        s.mean_ssim /= s.count as f64;
        Some(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub overall: LevelStats,
    pub per_level: BTreeMap<usize, LevelStats>,
    pub frames: Vec<TripletScore>,
}

pub fn aggregate_session(scores: &[TripletScore]) -> Result<QualityReport, MetricsError> {
    let overall = LevelStats::of(scores.iter()).ok_or(MetricsError::EmptyInput)?;
    let mut levels: Vec<usize> = scores.iter().map(|s| s.level).collect();
    levels.sort_unstable();
    levels.dedup();
    let per_level = levels
        .into_iter()
        .filter_map(|l| LevelStats::of(scores.iter().filter(|s| s.level == l)).map(|st| (l, st)))
        .collect();
    Ok(QualityReport { overall, per_level, frames: scores.to_vec() })
}

/// Renders the poses of the given log records at the session's base
/// resolution and returns them as PNG files.
pub fn materialize_ground_truth(
    prims: &ActivatedPrimitives,
    log: &SessionLog,
    indices: &[usize],
    options: &RenderOptions,
) -> Result<Vec<Vec<u8>>, MetricsError> {
    if let Some(&index) = indices.iter().find(|&&i| i >= log.records.len()) {
        return Err(MetricsError::IndexOutOfRange { index, len: log.records.len() });
    }
    indices
        .par_iter()
        .map(|&i| {
            let r = &log.records[i];
            let pose = CameraPose::from_degrees(r.azimuth_deg, r.elevation_deg, [r.tx, r.ty, r.tz]);
            let (fb, _) = render_framebuffer(prims, &pose, &log.base_intrinsics, options)?;
            Ok(encode_png(&fb)?)
        })
        .collect()
}

/// Scores every sampled frame of a session directory written by the
/// harness. Reference PNGs are stored under `ground_truth/` when
/// `write_ground_truth` is set.
pub fn evaluate_session(
    prims: &ActivatedPrimitives,
    session_dir: impl AsRef<Path>,
    options: &RenderOptions,
    write_ground_truth: bool,
) -> Result<QualityReport, MetricsError> {
    let dir = session_dir.as_ref();
    let log = load_session(dir)?;
    let indices: Vec<usize> = log.samples.iter().map(|s| s.index).collect();
    let pngs = materialize_ground_truth(prims, &log, &indices, options)?;
    if write_ground_truth {
        let gt_dir = dir.join("ground_truth");
        std::fs::create_dir_all(&gt_dir)?;
        for (sample, png) in log.samples.iter().zip(&pngs) {
            std::fs::write(gt_dir.join(format!("{:06}.png", sample.frame_id)), png)?;
        }
    }
    let scores = log
        .samples
        .par_iter()
        .zip(pngs.par_iter())
        .map(|(sample, png)| {
            let r = &log.records[sample.index];
            let triplet = EvalTriplet {
                frame_id: sample.frame_id,
                level: sample.level,
                pose: CameraPose::from_degrees(r.azimuth_deg, r.elevation_deg, [r.tx, r.ty, r.tz]),
                transmitted: decode_image(&std::fs::read(dir.join(&sample.file))?)?,
                ground_truth: decode_image(png)?,
            };
            triplet.score()
        })
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_session(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(level: usize, psnr: f64, ssim: f64) -> TripletScore {
        TripletScore { frame_id: 1, level, psnr, ssim }
    }

    #[test]
    fn single_triplet() {
        let r = aggregate_session(&[score(2, 30.0, 0.9)]).unwrap();
        assert_eq!(r.overall.mean_psnr, 30.0);
        assert_eq!(r.overall.min_ssim, 0.9);
        assert_eq!(r.per_level[&2].count, 1);
    }

    #[test]
    fn grouping() {
        let r = aggregate_session(&[score(0, 40.0, 0.95), score(1, 30.0, 0.8), score(0, 38.0, 0.93)]).unwrap();
        assert_eq!(r.per_level.len(), 2);
        assert!((r.per_level[&0].mean_ssim - 0.94).abs() < 1e-12);
        assert_eq!(r.overall.count, 3);
    }

    #[test]
    fn empty() {
        assert!(matches!(aggregate_session(&[]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn identical_pairs() {
        let img = RgbImage::from_fn(32, 32, |x, y| image::Rgb([x as u8 * 7, y as u8 * 5, 0]));
        let t = EvalTriplet {
            frame_id: 1,
            level: 0,
            pose: CameraPose::default(),
            transmitted: img.clone(),
            ground_truth: img,
        };
        let r = aggregate_session(&[t.score().unwrap()]).unwrap();
        assert_eq!(r.overall.mean_ssim, 1.0);
    }
}
