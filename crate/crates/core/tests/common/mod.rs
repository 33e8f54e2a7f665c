//! Helpers shared by the integration tests: random scenes and reference
//! implementations written without the library's math.

#![allow(dead_code)]

use std::path::Path;

use rand::Rng;
use splatstream::model::{ActivatedPrimitives, GaussianPrimitiveSet, SH_COEFFS};
use splatstream::scene::{write_scene, SceneSpec};

pub const ALPHA_MIN: f64 = 1.0 / 255.0;
pub const ALPHA_MAX: f64 = 0.99;
pub const COV_FLOOR: f64 = 0.3;

/// A raw set with arbitrary finite attributes and `rest` higher-order SH
/// coefficients per channel (the remainder zeroed).
pub fn random_set(rng: &mut impl Rng, n: usize, rest: usize) -> GaussianPrimitiveSet {
    let mut set = GaussianPrimitiveSet::with_capacity(n);
    for _ in 0..n {
        set.means.push([rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)]);
        set.log_scales.push([rng.gen_range(-8.0..1.0), rng.gen_range(-8.0..1.0), rng.gen_range(-8.0..1.0)]);
        set.quaternions.push([
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.1..1.0),
        ]);
        set.opacity_logits.push(rng.gen_range(-6.0..6.0));
        let mut sh = [[0.0f32; 3]; SH_COEFFS];
        for coeff in sh.iter_mut().take(rest + 1) {
            *coeff = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        }
        set.sh_coeffs.push(sh);
    }
    set
}

/// Bitwise equality of every stored float.
pub fn bit_identical(a: &GaussianPrimitiveSet, b: &GaussianPrimitiveSet) -> bool {
    fn bits<const N: usize>(v: &[[f32; N]]) -> Vec<u32> {
        v.iter().flat_map(|x| x.iter().map(|f| f.to_bits())).collect()
    }
    a.len() == b.len()
        && bits(&a.means) == bits(&b.means)
        && bits(&a.log_scales) == bits(&b.log_scales)
        && bits(&a.quaternions) == bits(&b.quaternions)
        && a.opacity_logits.iter().map(|f| f.to_bits()).eq(b.opacity_logits.iter().map(|f| f.to_bits()))
        && a.sh_coeffs
            .iter()
            .zip(&b.sh_coeffs)
            .all(|(x, y)| bits(x) == bits(y))
}

/// Camera-space coordinates of `p` for a camera at `t` rotated by
/// `R_y(az) R_x(el)`, with the rotation written out entry by entry.
pub fn oracle_camera_point(az: f64, el: f64, t: [f64; 3], p: [f64; 3]) -> [f64; 3] {
    let (st, ct) = (az.sin(), az.cos());
    let (sp, cp) = (el.sin(), el.cos());
    // Columns of the camera-to-world rotation.
    let right = [ct, 0.0, -st];
    let down = [st * sp, cp, ct * sp];
    let fwd = [st * cp, -sp, ct * cp];
    let d = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
    let dot = |a: [f64; 3]| a[0] * d[0] + a[1] * d[1] + a[2] * d[2];
    [dot(right), dot(down), dot(fwd)]
}

pub fn oracle_pixel(az: f64, el: f64, t: [f64; 3], p: [f64; 3], fx: f64, fy: f64, cx: f64, cy: f64) -> [f64; 3] {
    let c = oracle_camera_point(az, el, t, p);
    [fx * c[0] / c[2] + cx, fy * c[1] / c[2] + cy, c[2]]
}

type M3 = [[f64; 3]; 3];

fn mul3(a: &M3, b: &M3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn transpose3(a: &M3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[j][i];
        }
    }
    m
}

/// Rotation of a unit quaternion `(w, x, y, z)`.
fn quat_matrix(q: [f64; 4]) -> M3 {
    let [w, x, y, z] = q;
    [
        [w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ]
}

pub struct Camera {
    pub az: f64,
    pub el: f64,
    pub t: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// Renders by evaluating every Gaussian at every pixel center, front to
/// back, with no tiling, bounding boxes or early termination.
pub fn oracle_render(prims: &ActivatedPrimitives, cam: &Camera, background: [f64; 3]) -> Vec<[f64; 3]> {
    let (st, ct) = (cam.az.sin(), cam.az.cos());
    let (sp, cp) = (cam.el.sin(), cam.el.cos());
    let c2w: M3 = [[ct, st * sp, st * cp], [0.0, cp, -sp], [-st, ct * sp, ct * cp]];
    let w2c = transpose3(&c2w);
    let lim_x = 1.3 * f64::from(cam.width) / (2.0 * cam.fx);
    let lim_y = 1.3 * f64::from(cam.height) / (2.0 * cam.fy);

    struct Splat {
        depth: f64,
        u: f64,
        v: f64,
        cov: [f64; 3],
        opacity: f64,
        color: [f64; 3],
    }
    let mut splats = Vec::new();
    for i in 0..prims.len() {
        let pc = oracle_camera_point(cam.az, cam.el, cam.t, prims.means[i]);
        if pc[2] <= 0.01 {
            continue;
        }
        let s = prims.scales[i];
        let r = quat_matrix(prims.rotations[i]);
        let rs: M3 = std::array::from_fn(|a| std::array::from_fn(|b| r[a][b] * s[b]));
        let sigma = mul3(&rs, &transpose3(&rs));
        let sc = mul3(&mul3(&w2c, &sigma), &c2w);
        let z = pc[2];
        let tx = (pc[0] / z).clamp(-lim_x, lim_x) * z;
        let ty = (pc[1] / z).clamp(-lim_y, lim_y) * z;
        let j = [[cam.fx / z, 0.0, -cam.fx * tx / (z * z)], [0.0, cam.fy / z, -cam.fy * ty / (z * z)]];
        let mut cov = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                cov[a][b] = (0..3).flat_map(|k| (0..3).map(move |l| (k, l))).map(|(k, l)| j[a][k] * sc[k][l] * j[b][l]).sum();
            }
        }
        splats.push(Splat {
            depth: z,
            u: cam.fx * pc[0] / z + cam.cx,
            v: cam.fy * pc[1] / z + cam.cy,
            cov: [cov[0][0] + COV_FLOOR, 0.5 * (cov[0][1] + cov[1][0]), cov[1][1] + COV_FLOOR],
            opacity: prims.opacities[i],
            color: prims.colors_dc[i],
        });
    }
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth));

    let mut out = Vec::with_capacity((cam.width * cam.height) as usize);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let mut c = [0.0; 3];
            let mut trans = 1.0;
            for s in &splats {
                let dx = f64::from(x) - s.u;
                let dy = f64::from(y) - s.v;
                let [a, b, d] = s.cov;
                let det = a * d - b * b;
                let maha = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
                let alpha = (s.opacity * (-0.5 * maha).exp()).min(ALPHA_MAX);
                if alpha < ALPHA_MIN {
                    continue;
                }
                for k in 0..3 {
                    c[k] += trans * alpha * s.color[k];
                }
                trans *= 1.0 - alpha;
            }
            out.push([c[0] + trans * background[0], c[1] + trans * background[1], c[2] + trans * background[2]]);
        }
    }
    out
}

/// Model root with one synthetic scene per `(id, count, seed)`.
pub fn model_root(models: &[(&str, usize, u64)]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().expect("tempdir");
    for &(id, count, seed) in models {
        write_scene(dir.path(), id, &SceneSpec::with_count(count, seed)).expect("write scene");
    }
    dir
}

pub fn write_file(path: &Path, bytes: &[u8]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, bytes).unwrap();
}
