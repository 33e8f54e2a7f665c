//! CPU software rasterizer for activated Gaussians.
//!
//! Pipeline: [`project_gaussians`] → [`depth_order`] → [`rasterize_ordered`] →
//! [`encode_jpeg`]. [`render_view`] strings the stages together for one
//! ladder profile.

mod encode;
mod project;
mod raster;
mod sh;

use std::time::Instant;

pub use encode::{decode_image, encode_jpeg, encode_png};
pub use project::{covariance3d, project_gaussians, ProjectedSplats, ScreenSplat, SplatRow};
pub use raster::{depth_order, rasterize, rasterize_ordered, sort_splats, Framebuffer};
pub use sh::eval_sh;

use thiserror::Error;

use crate::abr::QualityProfile;
use crate::camera::{scale_intrinsics, world_to_camera, CameraPose, Intrinsics};
use crate::model::ActivatedPrimitives;

/// Added to the diagonal of every projected covariance (pixels²).
pub const COV2D_FLOOR: f64 = 0.3;
/// Per-splat alpha ceiling.
pub const ALPHA_MAX: f64 = 0.99;
/// Contributions below this alpha are skipped.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
/// Compositing stops once transmittance falls below this.
pub const TRANSMITTANCE_MIN: f64 = 1.0 / 255.0;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("cannot encode a {width}x{height} framebuffer: {reason}")]
    EncodeFailure { width: u32, height: u32, reason: String },
    #[error("invalid intrinsics: {0:?}")]
    InvalidIntrinsics(Intrinsics),
    #[error("invalid pose")]
    InvalidPose,
    #[error("jpeg quality {0} outside 1..=100")]
    InvalidQuality(u8),
    #[error("decode failed: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub background: [f64; 3],
    /// Spherical harmonic degree used for color, 0 for view-independent.
    pub sh_degree: u8,
    /// Drop splats whose extent lies entirely outside the image.
    pub frustum_cull: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            sh_degree: 0,
            frustum_cull: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RenderStats {
    pub render_ms: f64,
    pub splats_drawn: usize,
    pub splats_culled: usize,
}

/// Rasterizes a view into a framebuffer without encoding it.
pub fn render_framebuffer(
    prims: &ActivatedPrimitives,
    pose: &CameraPose,
    k: &Intrinsics,
    options: &RenderOptions,
) -> Result<(Framebuffer, RenderStats), RenderError> {
    if !k.is_valid() {
        return Err(RenderError::InvalidIntrinsics(*k));
    }
    if !pose.is_finite() {
        return Err(RenderError::InvalidPose);
    }
    let started = Instant::now();
    let view = world_to_camera(pose);
    let projected = project_gaussians(prims, &view, k, options);
    let order = depth_order(&projected.splats);
    let fb = rasterize_ordered(&projected.splats, &order, k.width, k.height, options.background);
    let stats = RenderStats {
        render_ms: started.elapsed().as_secs_f64() * 1e3,
        splats_drawn: projected.splats.len(),
        splats_culled: projected.culled,
    };
    Ok((fb, stats))
}

/// Renders and JPEG-encodes a view with intrinsics already at the output
/// resolution.
pub fn render_frame(
    prims: &ActivatedPrimitives,
    pose: &CameraPose,
    k: &Intrinsics,
    jpeg_quality: u8,
    options: &RenderOptions,
) -> Result<(Vec<u8>, RenderStats), RenderError> {
    if !(1..=100).contains(&jpeg_quality) {
        return Err(RenderError::InvalidQuality(jpeg_quality));
    }
    let started = Instant::now();
    let (fb, mut stats) = render_framebuffer(prims, pose, k, options)?;
    let jpeg = encode_jpeg(&fb, jpeg_quality)?;
    stats.render_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((jpeg, stats))
}

/// Renders a view for a ladder profile, rescaling the session's base
/// intrinsics to the profile resolution first.
pub fn render_view(
    prims: &ActivatedPrimitives,
    pose: &CameraPose,
    base: &Intrinsics,
    profile: &QualityProfile,
    options: &RenderOptions,
) -> Result<(Vec<u8>, RenderStats), RenderError> {
    let k = scale_intrinsics(base, profile.width, profile.height);
    render_frame(prims, pose, &k, profile.jpeg_quality, options)
}
