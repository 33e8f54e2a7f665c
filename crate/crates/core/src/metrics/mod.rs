//! Image-quality evaluation of streamed sessions against lossless
//! full-resolution renders.

mod evaluate;
mod image_quality;

pub use evaluate::{
    aggregate_session, evaluate_session, materialize_ground_truth, EvalTriplet, LevelStats, QualityReport,
    TripletScore,
};
pub use image_quality::{luma, psnr, ssim, upscale_bilinear, PSNR_CAP_DB, SSIM_WINDOW};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("image {0}x{1} smaller than the 11x11 window")]
    TooSmall(u32, u32),
    #[error("sample index {index} outside log of {len} records")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no triplets to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Harness(#[from] crate::harness::HarnessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
