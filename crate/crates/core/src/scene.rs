//! Seeded synthetic scenes for examples, tests and benchmarks.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::{CameraPose, Intrinsics};
use crate::model::{write_ply, GaussianPrimitiveSet, SH_C0};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub count: usize,
    pub seed: u64,
    /// Half-extent of the cube the means are drawn from.
    pub extent: f32,
    /// Range of activated scales.
    pub scale_range: (f32, f32),
    /// Range of activated opacities.
    pub opacity_range: (f32, f32),
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 7,
            extent: 1.5,
            scale_range: (0.03, 0.15),
            opacity_range: (0.5, 0.99),
        }
    }
}

impl SceneSpec {
    pub fn with_count(count: usize, seed: u64) -> Self {
        Self { count, seed, ..Self::default() }
    }
}

fn logit(p: f32) -> f32 {
    (p / (1.0 - p)).ln()
}

/// Gaussians scattered in a cube around the origin with random colors,
/// anisotropic scales and orientations. Only DC color is populated.
pub fn generate(spec: &SceneSpec) -> GaussianPrimitiveSet {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut set = GaussianPrimitiveSet::with_capacity(spec.count);
    let (s_lo, s_hi) = spec.scale_range;
    let (o_lo, o_hi) = spec.opacity_range;
    for _ in 0..spec.count {
        let e = spec.extent;
        set.means.push([rng.gen_range(-e..=e), rng.gen_range(-e..=e), rng.gen_range(-e..=e)]);
        set.log_scales.push([
            rng.gen_range(s_lo..=s_hi).ln(),
            rng.gen_range(s_lo..=s_hi).ln(),
            rng.gen_range(s_lo..=s_hi).ln(),
        ]);
        let q: [f32; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..=1.0));
        let q = if q.iter().map(|v| v * v).sum::<f32>() < 1e-6 { [1.0, 0.0, 0.0, 0.0] } else { q };
        set.quaternions.push(q);
        set.opacity_logits.push(logit(rng.gen_range(o_lo..=o_hi)));
        let mut sh = [[0.0f32; 3]; 16];
        for c in 0..3 {
            let color: f32 = rng.gen_range(0.05..=0.95);
            sh[0][c] = (color - 0.5) / SH_C0 as f32;
        }
        set.sh_coeffs.push(sh);
    }
    set
}

/// A pose looking at the scene center from `distance` along `-z`.
pub fn default_pose() -> CameraPose {
    CameraPose::new(0.0, 0.0, [0.0, 0.0, -4.0])
}

/// 1280×720 with a 60° horizontal field of view.
pub fn default_intrinsics() -> Intrinsics {
    Intrinsics::from_fov(1280, 720, 60.0)
}

/// Writes `root/<id>/point_cloud.ply` and returns its path.
pub fn write_scene(root: impl AsRef<Path>, id: &str, spec: &SceneSpec) -> std::io::Result<PathBuf> {
    let dir = root.as_ref().join(id);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("point_cloud.ply");
    std::fs::write(&path, write_ply(&generate(spec), 0))?;
    Ok(path)
}
