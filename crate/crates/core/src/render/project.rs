use nalgebra::{Matrix2x3, Matrix3, Vector3};

use super::sh::eval_sh;
use super::{RenderOptions, ALPHA_MIN, COV2D_FLOOR};
use crate::camera::{project_camera, Intrinsics, Projection, ViewTransform};
use crate::model::ActivatedPrimitives;

/// A Gaussian projected to the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenSplat {
    /// Pixel coordinates of the projected mean.
    pub mean2d: [f64; 2],
    /// Symmetric 2D covariance `[xx, xy, yy]` in pixels².
    pub cov2d: [f64; 3],
    /// Inverse covariance `[xx, xy, yy]`.
    pub conic: [f64; 3],
    pub depth: f64,
    pub color: [f64; 3],
    pub opacity: f64,
    /// Half-widths of the axis-aligned box outside which the splat's alpha
    /// stays below [`ALPHA_MIN`].
    pub extent: [f64; 2],
    /// Index of the source Gaussian.
    pub source: u32,
    /// `ln(ALPHA_MIN / opacity)`: exponents below this give alpha under
    /// [`ALPHA_MIN`].
    power_cutoff: f64,
}

impl ScreenSplat {
    /// Builds a splat from a mean and covariance, deriving conic and extent.
    pub fn new(mean2d: [f64; 2], cov2d: [f64; 3], depth: f64, color: [f64; 3], opacity: f64) -> Self {
        let [a, b, c] = cov2d;
        let det = a * c - b * b;
        let conic = [c / det, -b / det, a / det];
        // Mahalanobis radius where opacity * exp(-r²/2) drops to ALPHA_MIN.
        let r2 = (2.0 * (opacity / ALPHA_MIN).ln()).max(0.0);
        let pad = 1e-6;
        Self {
            mean2d,
            cov2d,
            conic,
            depth,
            color,
            opacity,
            extent: [(r2 * a).sqrt() + pad, (r2 * c).sqrt() + pad],
            source: 0,
            power_cutoff: (ALPHA_MIN / opacity).ln(),
        }
    }

    /// Inclusive pixel bounds `(x0, y0, x1, y1)` clipped to the image, or
    /// `None` if the extent misses the image entirely.
    pub fn pixel_bounds(&self, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
        let [u, v] = self.mean2d;
        let [rx, ry] = self.extent;
        let x0 = (u - rx).ceil().max(0.0);
        let y0 = (v - ry).ceil().max(0.0);
        let x1 = (u + rx).floor().min(f64::from(width) - 1.0);
        let y1 = (v + ry).floor().min(f64::from(height) - 1.0);
        if !(x0 <= x1 && y0 <= y1) {
            return None;
        }
        Some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    }

    /// The part of row `y` where alpha can reach [`ALPHA_MIN`], padded
    /// slightly; `None` if the row misses the ellipse.
    #[inline]
    pub fn row(&self, y: f64) -> Option<SplatRow> {
        let [ca, cb, cc] = self.conic;
        let dy = y - self.mean2d[1];
        // ca dx² + 2 cb dy dx + cc dy² <= -2 cutoff, solved for dx.
        let r2 = -2.0 * self.power_cutoff;
        let disc = (cb * dy) * (cb * dy) - ca * (cc * dy * dy - r2);
        if !(disc >= 0.0) {
            return None;
        }
        let root = disc.sqrt();
        let pad = 1e-6;
        let lo = self.mean2d[0] + (-cb * dy - root) / ca - pad;
        let hi = self.mean2d[0] + (-cb * dy + root) / ca + pad;
        if hi < 0.0 || lo > f64::from(u32::MAX) {
            return None;
        }
        Some(SplatRow {
            x0: lo.ceil().max(0.0) as u32,
            x1: hi.floor().min(f64::from(u32::MAX)) as u32,
            u: self.mean2d[0],
            base: -0.5 * cc * dy * dy,
            slope: -cb * dy,
            half_ca: 0.5 * ca,
            cutoff: self.power_cutoff,
            opacity: self.opacity,
        })
    }

    /// Alpha contribution at pixel `(x, y)`, zero when below [`ALPHA_MIN`].
    #[inline]
    pub fn alpha_at(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.mean2d[0];
        let dy = y - self.mean2d[1];
        let [ca, cb, cc] = self.conic;
        let power = -0.5 * (ca * dx * dx + cc * dy * dy) - cb * dx * dy;
        if power > 0.0 || power < self.power_cutoff {
            return 0.0;
        }
        // Single precision is ample for an 8-bit output and much cheaper.
        let alpha = (self.opacity * f64::from((power as f32).exp())).min(super::ALPHA_MAX);
        if alpha < ALPHA_MIN {
            0.0
        } else {
            alpha
        }
    }
}

/// One row of a splat with the row-constant part of the exponent folded
/// in.
#[derive(Debug, Clone, Copy)]
pub struct SplatRow {
    /// Inclusive column range.
    pub x0: u32,
    pub x1: u32,
    u: f64,
    base: f64,
    slope: f64,
    half_ca: f64,
    cutoff: f64,
    opacity: f64,
}

impl SplatRow {
    /// Same value as [`ScreenSplat::alpha_at`] on this row, up to rounding.
    #[inline]
    pub fn alpha_at(&self, x: f64) -> f64 {
        let dx = x - self.u;
        let power = self.base + dx * (self.slope - self.half_ca * dx);
        if power > 0.0 || power < self.cutoff {
            return 0.0;
        }
        let alpha = (self.opacity * f64::from((power as f32).exp())).min(super::ALPHA_MAX);
        if alpha < ALPHA_MIN {
            0.0
        } else {
            alpha
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProjectedSplats {
    pub splats: Vec<ScreenSplat>,
    pub culled: usize,
}

fn quat_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// World-space covariance `R diag(s²) R^T`.
pub fn covariance3d(scale: [f64; 3], rotation: [f64; 4]) -> Matrix3<f64> {
    let m = quat_to_matrix(rotation) * Matrix3::from_diagonal(&Vector3::from(scale));
    m * m.transpose()
}

/// Projects every Gaussian to screen space (EWA splatting).
///
/// Gaussians behind the near plane, too transparent to ever reach
/// [`ALPHA_MIN`], or (with frustum culling on) entirely off-screen are
/// dropped and counted in `culled`.
pub fn project_gaussians(
    prims: &ActivatedPrimitives,
    view: &ViewTransform,
    k: &Intrinsics,
    options: &RenderOptions,
) -> ProjectedSplats {
    let w2c = view.rotation_w2c();
    let lim_x = 1.3 * (f64::from(k.width) / (2.0 * k.fx));
    let lim_y = 1.3 * (f64::from(k.height) / (2.0 * k.fy));
    let mut out = ProjectedSplats {
        splats: Vec::with_capacity(prims.len()),
        culled: 0,
    };

    for i in 0..prims.len() {
        let opacity = prims.opacities[i];
        let mean = Vector3::from(prims.means[i]);
        let pc = view.to_camera(&mean);
        let (u, v, depth) = match project_camera(&pc, k) {
            Projection::Visible { u, v, depth } => (u, v, depth),
            Projection::BehindCamera { .. } => {
                out.culled += 1;
                continue;
            }
        };
        if opacity < ALPHA_MIN {
            out.culled += 1;
            continue;
        }

        let sigma = covariance3d(prims.scales[i], prims.rotations[i]);
        let sigma_cam = w2c * sigma * w2c.transpose();
        let z = pc.z;
        let tx = (pc.x / z).clamp(-lim_x, lim_x) * z;
        let ty = (pc.y / z).clamp(-lim_y, lim_y) * z;
        let jac = Matrix2x3::new(
            k.fx / z,
            0.0,
            -k.fx * tx / (z * z),
            0.0,
            k.fy / z,
            -k.fy * ty / (z * z),
        );
        let cov = jac * sigma_cam * jac.transpose();
        let cov2d = [
            cov[(0, 0)] + COV2D_FLOOR,
            0.5 * (cov[(0, 1)] + cov[(1, 0)]),
            cov[(1, 1)] + COV2D_FLOOR,
        ];
        if !cov2d.iter().all(|c| c.is_finite()) {
            out.culled += 1;
            continue;
        }

        let color = if options.sh_degree == 0 {
            prims.colors_dc[i]
        } else {
            let d = (mean - view.center).normalize();
            eval_sh(options.sh_degree.min(3), &prims.sh_coeffs[i], [d.x, d.y, d.z])
        };

        let mut splat = ScreenSplat::new([u, v], cov2d, depth, color, opacity);
        splat.source = i as u32;
        if options.frustum_cull && splat.pixel_bounds(k.width, k.height).is_none() {
            out.culled += 1;
            continue;
        }
        out.splats.push(splat);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{world_to_camera, CameraPose};

    fn single(mean: [f64; 3], scale: f64) -> ActivatedPrimitives {
        ActivatedPrimitives {
            means: vec![mean],
            scales: vec![[scale; 3]],
            rotations: vec![[1.0, 0.0, 0.0, 0.0]],
            opacities: vec![0.9],
            colors_dc: vec![[1.0, 0.0, 0.0]],
            sh_coeffs: vec![[[0.0; 3]; 16]],
        }
    }

    #[test]
    fn empty_scene() {
        let k = Intrinsics::from_fov(64, 64, 60.0);
        let view = world_to_camera(&CameraPose::default());
        let p = project_gaussians(&ActivatedPrimitives::default(), &view, &k, &RenderOptions::default());
        assert!(p.splats.is_empty());
        assert_eq!(p.culled, 0);
    }

    #[test]
    fn on_axis_isotropic_covariance() {
        let k = Intrinsics::from_fov(640, 480, 60.0);
        let view = world_to_camera(&CameraPose::default());
        let (d, s) = (5.0, 0.1);
        let p = project_gaussians(&single([0.0, 0.0, d], s), &view, &k, &RenderOptions::default());
        let splat = p.splats[0];
        // On the optical axis the Jacobian is diag(f/d, f/d).
        let expected = (k.fx * s / d).powi(2);
        assert!((splat.cov2d[0] / expected - 1.0).abs() < 0.05, "{:?}", splat.cov2d);
        assert!((splat.cov2d[2] / expected - 1.0).abs() < 0.05);
        assert!(splat.cov2d[1].abs() < 1e-9);
        assert_eq!(splat.mean2d, [k.cx, k.cy]);
    }

    #[test]
    fn behind_camera_is_culled() {
        let k = Intrinsics::from_fov(64, 64, 60.0);
        let view = world_to_camera(&CameraPose::default());
        let p = project_gaussians(&single([0.0, 0.0, -2.0], 0.1), &view, &k, &RenderOptions::default());
        assert!(p.splats.is_empty());
        assert_eq!(p.culled, 1);
    }

    #[test]
    fn off_screen_culling_is_optional() {
        let k = Intrinsics::from_fov(64, 64, 60.0);
        let view = world_to_camera(&CameraPose::default());
        let prims = single([50.0, 0.0, 5.0], 0.01);
        let culled = project_gaussians(&prims, &view, &k, &RenderOptions::default());
        assert_eq!(culled.culled, 1);
        let kept = RenderOptions {
            frustum_cull: false,
            ..RenderOptions::default()
        };
        assert_eq!(project_gaussians(&prims, &view, &k, &kept).splats.len(), 1);
    }

    #[test]
    fn covariance_floor() {
        let k = Intrinsics::from_fov(64, 64, 60.0);
        let view = world_to_camera(&CameraPose::default());
        let p = project_gaussians(&single([0.0, 0.0, 5.0], 1e-9), &view, &k, &RenderOptions::default());
        let [a, b, c] = p.splats[0].cov2d;
        let tr = a + c;
        let min_eig = tr / 2.0 - ((a - c).powi(2) / 4.0 + b * b).sqrt();
        assert!(min_eig >= COV2D_FLOOR - 1e-12);
    }

    #[test]
    fn rotation_matrix_is_orthonormal() {
        let q = [0.5f64, 0.5, -0.5, 0.5];
        let r = quat_to_matrix(q);
        assert!((r * r.transpose() - Matrix3::identity()).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }
}
