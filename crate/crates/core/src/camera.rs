//! Camera poses, pinhole intrinsics and the world-to-camera transform.
//!
//! Conventions: the camera looks down its local `+z`, `+x` points right and
//! `+y` points down in the image. The rotation is `R = R_y(azimuth) *
//! R_x(elevation)`, so the forward direction in world space is
//! `(sin az * cos el, -sin el, cos az * cos el)`. World "up" is `-y`.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

/// Margin keeping elevation away from the poles.
pub const ELEVATION_EPS: f64 = 1e-4;

/// Points at or closer than this depth are not rendered.
pub const Z_NEAR: f64 = 0.01;

const MAX_ELEVATION: f64 = std::f64::consts::FRAC_PI_2 - ELEVATION_EPS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Radians about world `y`.
    pub azimuth: f64,
    /// Radians about camera `x`, clamped to `±(pi/2 - 1e-4)`.
    pub elevation: f64,
    pub translation: [f64; 3],
}

impl Default for CameraPose {
    fn default() -> Self {
        Self {
            azimuth: 0.0,
            elevation: 0.0,
            translation: [0.0; 3],
        }
    }
}

impl CameraPose {
    pub fn new(azimuth: f64, elevation: f64, translation: [f64; 3]) -> Self {
        Self {
            azimuth,
            elevation: clamp_elevation(elevation),
            translation,
        }
    }

    /// Builds a pose from wire angles in degrees.
    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64, translation: [f64; 3]) -> Self {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians(), translation)
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }

    pub fn is_finite(&self) -> bool {
        self.azimuth.is_finite()
            && self.elevation.is_finite()
            && self.translation.iter().all(|v| v.is_finite())
    }

    /// World-space viewing direction.
    pub fn forward(&self) -> [f64; 3] {
        let (st, ct) = self.azimuth.sin_cos();
        let (sp, cp) = self.elevation.sin_cos();
        [st * cp, -sp, ct * cp]
    }
}

pub fn clamp_elevation(elevation: f64) -> f64 {
    elevation.clamp(-MAX_ELEVATION, MAX_ELEVATION)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    /// Square-pixel intrinsics with a centered principal point and the
    /// given horizontal field of view.
    pub fn from_fov(width: u32, height: u32, fov_x_deg: f64) -> Self {
        let fx = f64::from(width) / (2.0 * (fov_x_deg.to_radians() / 2.0).tan());
        Self {
            fx,
            fy: fx,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            width,
            height,
        }
    }

    pub fn fov_x(&self) -> f64 {
        2.0 * (f64::from(self.width) / (2.0 * self.fx)).atan()
    }

    pub fn fov_y(&self) -> f64 {
        2.0 * (f64::from(self.height) / (2.0 * self.fy)).atan()
    }

    pub fn is_valid(&self) -> bool {
        self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && (0.0..=f64::from(self.width)).contains(&self.cx)
            && (0.0..=f64::from(self.height)).contains(&self.cy)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Rescales focal lengths and principal point for a new output size so the
/// field of view and framing stay fixed.
pub fn scale_intrinsics(k: &Intrinsics, new_width: u32, new_height: u32) -> Intrinsics {
    if new_width == k.width && new_height == k.height {
        return *k;
    }
    let sx = f64::from(new_width) / f64::from(k.width);
    let sy = f64::from(new_height) / f64::from(k.height);
    Intrinsics {
        fx: k.fx * sx,
        fy: k.fy * sy,
        cx: k.cx * sx,
        cy: k.cy * sy,
        width: new_width,
        height: new_height,
    }
}

/// `R_y(azimuth) * R_x(elevation)`.
pub fn rotation_from_angles(azimuth: f64, elevation: f64) -> Matrix3<f64> {
    let (st, ct) = azimuth.sin_cos();
    let (sp, cp) = elevation.sin_cos();
    let ry = Matrix3::new(ct, 0.0, st, 0.0, 1.0, 0.0, -st, 0.0, ct);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
    ry * rx
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewTransform {
    /// Camera-to-world rotation.
    pub rotation: Matrix3<f64>,
    /// Camera center in world space.
    pub center: Vector3<f64>,
    pub world_to_camera: Matrix4<f64>,
}

impl ViewTransform {
    /// Maps a world point into camera space as `R^T (p - t)`.
    ///
    /// Equivalent to applying `world_to_camera`; subtracting the center
    /// first keeps the result invariant under a common world shift.
    pub fn to_camera(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.tr_mul(&(point - self.center))
    }

    /// `R^T`, the world-to-camera rotation.
    pub fn rotation_w2c(&self) -> Matrix3<f64> {
        self.rotation.transpose()
    }
}

/// Builds `[R^T, -R^T t; 0, 1]` for a pose.
pub fn world_to_camera(pose: &CameraPose) -> ViewTransform {
    let rotation = rotation_from_angles(pose.azimuth, pose.elevation);
    let center = Vector3::from(pose.translation);
    let rt = rotation.transpose();
    let shift = -(rt * center);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&shift);
    ViewTransform {
        rotation,
        center,
        world_to_camera: m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Visible { u: f64, v: f64, depth: f64 },
    /// `z_c <= Z_NEAR`; the caller culls the point.
    BehindCamera { depth: f64 },
}

impl Projection {
    pub fn visible(self) -> Option<(f64, f64, f64)> {
        match self {
            Projection::Visible { u, v, depth } => Some((u, v, depth)),
            Projection::BehindCamera { .. } => None,
        }
    }
}

/// Pinhole projection of a world point to pixel coordinates.
pub fn project(point: &Vector3<f64>, view: &ViewTransform, k: &Intrinsics) -> Projection {
    project_camera(&view.to_camera(point), k)
}

pub(crate) fn project_camera(pc: &Vector3<f64>, k: &Intrinsics) -> Projection {
    let z = pc.z;
    if z <= Z_NEAR {
        return Projection::BehindCamera { depth: z };
    }
    Projection::Visible {
        u: k.fx * pc.x / z + k.cx,
        v: k.fy * pc.y / z + k.cy,
        depth: z,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Forward,
    Backward,
    Left,
    Right,
    /// Towards world up (`-y`).
    Up,
    Down,
    Yaw,
    Pitch,
}

/// Moves the camera relative to its current heading. Planar motion follows
/// the azimuth only; `step` is in world units, or radians for yaw/pitch.
pub fn move_relative(pose: &CameraPose, motion: Motion, step: f64) -> CameraPose {
    let (st, ct) = pose.azimuth.sin_cos();
    let mut next = *pose;
    let t = &mut next.translation;
    match motion {
        Motion::Forward => {
            t[0] += step * st;
            t[2] += step * ct;
        }
        Motion::Backward => {
            t[0] -= step * st;
            t[2] -= step * ct;
        }
        Motion::Right => {
            t[0] += step * ct;
            t[2] -= step * st;
        }
        Motion::Left => {
            t[0] -= step * ct;
            t[2] += step * st;
        }
        Motion::Up => t[1] -= step,
        Motion::Down => t[1] += step,
        Motion::Yaw => next.azimuth += step,
        Motion::Pitch => next.elevation = clamp_elevation(next.elevation + step),
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_rotation() {
        assert_eq!(rotation_from_angles(0.0, 0.0), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_faces_x() {
        let r = rotation_from_angles(FRAC_PI_2, 0.0);
        let fwd = r * Vector3::z();
        assert!((fwd - Vector3::x()).norm() < 1e-12);
        let pose = CameraPose::new(FRAC_PI_2, 0.0, [0.0; 3]);
        let f = pose.forward();
        assert!((f[0] - 1.0).abs() < 1e-12 && f[1].abs() < 1e-12 && f[2].abs() < 1e-12);
    }

    #[test]
    fn forward_matches_rotation_column() {
        let pose = CameraPose::new(0.7, -0.3, [0.0; 3]);
        let r = rotation_from_angles(pose.azimuth, pose.elevation);
        let col = r.column(2);
        let f = pose.forward();
        for i in 0..3 {
            assert!((col[i] - f[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_view() {
        let v = world_to_camera(&CameraPose::default());
        assert_eq!(v.world_to_camera, Matrix4::identity());
    }

    #[test]
    fn translation_column() {
        let v = world_to_camera(&CameraPose::new(0.0, 0.0, [1.0, 2.0, 3.0]));
        let col = v.world_to_camera.fixed_view::<3, 1>(0, 3);
        assert_eq!([col[0], col[1], col[2]], [-1.0, -2.0, -3.0]);
    }

    #[test]
    fn center_maps_to_origin() {
        let pose = CameraPose::new(1.1, 0.4, [3.0, -2.0, 7.5]);
        let v = world_to_camera(&pose);
        let h = v.world_to_camera * nalgebra::Vector4::new(3.0, -2.0, 7.5, 1.0);
        assert!(h.xyz().norm() < 1e-12);
        assert_eq!(h.w, 1.0);
        let row = v.world_to_camera.row(3);
        assert_eq!([row[0], row[1], row[2], row[3]], [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn on_axis_hits_principal_point() {
        let k = Intrinsics::from_fov(1280, 720, 60.0);
        let view = world_to_camera(&CameraPose::default());
        let (u, v, d) = project(&Vector3::new(0.0, 0.0, 5.0), &view, &k).visible().unwrap();
        assert_eq!((u, v, d), (k.cx, k.cy, 5.0));
    }

    #[test]
    fn off_axis_pixel() {
        let k = Intrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 640.0,
            cy: 360.0,
            width: 1280,
            height: 720,
        };
        let view = world_to_camera(&CameraPose::default());
        let (u, _, _) = project(&Vector3::new(1.0, 0.0, 5.0), &view, &k).visible().unwrap();
        assert_eq!(u, 740.0);
    }

    #[test]
    fn behind_camera() {
        let k = Intrinsics::from_fov(64, 64, 60.0);
        let view = world_to_camera(&CameraPose::default());
        assert!(matches!(
            project(&Vector3::new(0.0, 0.0, -1.0), &view, &k),
            Projection::BehindCamera { .. }
        ));
        assert!(project(&Vector3::new(0.0, 0.0, Z_NEAR), &view, &k).visible().is_none());
    }

    #[test]
    fn halve_intrinsics() {
        let k = Intrinsics {
            fx: 1000.0,
            fy: 900.0,
            cx: 640.0,
            cy: 360.0,
            width: 1280,
            height: 720,
        };
        let h = scale_intrinsics(&k, 640, 360);
        assert_eq!((h.fx, h.fy, h.cx, h.cy), (500.0, 450.0, 320.0, 180.0));
        assert_eq!(scale_intrinsics(&k, 1280, 720), k);

        let q = scale_intrinsics(&k, 320, 180);
        assert_eq!(q.fx, 250.0);
        assert!((q.fov_x() - k.fov_x()).abs() < 1e-9);
        assert!((q.fov_y() - k.fov_y()).abs() < 1e-9);
    }

    #[test]
    fn forward_motion() {
        let p = move_relative(&CameraPose::default(), Motion::Forward, 1.0);
        assert_eq!(p.translation, [0.0, 0.0, 1.0]);
        let p = move_relative(&CameraPose::new(FRAC_PI_2, 0.0, [0.0; 3]), Motion::Forward, 1.0);
        assert!((p.translation[0] - 1.0).abs() < 1e-12);
        assert!(p.translation[2].abs() < 1e-12);
    }

    #[test]
    fn strafe_is_camera_right() {
        let pose = CameraPose::new(0.4, 0.0, [0.0; 3]);
        let p = move_relative(&pose, Motion::Right, 1.0);
        let right = rotation_from_angles(0.4, 0.0) * Vector3::x();
        let d = Vector3::from(p.translation);
        assert!((d - right).norm() < 1e-12);
        let l = move_relative(&pose, Motion::Left, 1.0);
        assert!((Vector3::from(l.translation) + right).norm() < 1e-12);
    }

    #[test]
    fn vertical_motion_touches_y_only() {
        let pose = CameraPose::new(0.4, 0.2, [1.0, 2.0, 3.0]);
        assert_eq!(move_relative(&pose, Motion::Up, 0.5).translation, [1.0, 1.5, 3.0]);
        assert_eq!(move_relative(&pose, Motion::Down, 0.5).translation, [1.0, 2.5, 3.0]);
    }

    #[test]
    fn pitch_clamped() {
        let pose = CameraPose::new(0.0, FRAC_PI_2 - 2e-4, [0.0; 3]);
        let p = move_relative(&pose, Motion::Pitch, 0.1);
        assert_eq!(p.elevation, FRAC_PI_2 - 1e-4);
        let p = move_relative(&CameraPose::default(), Motion::Pitch, -10.0);
        assert_eq!(p.elevation, -(FRAC_PI_2 - 1e-4));
    }
}
