//! Parses a 3DGS PLY file (or a freshly generated one) and prints
//! attribute statistics after activation.
//!
//! cargo run --example parse_ply -- [path/to/point_cloud.ply]

use splatstream::model::{activate, parse_ply, write_ply, MAX_REST};
use splatstream::scene::{generate, SceneSpec};

fn main() -> anyhow::Result<()> {
    let bytes = match std::env::args().nth(1) {
        Some(path) => std::fs::read(path)?,
        None => write_ply(&generate(&SceneSpec::with_count(5000, 3)), MAX_REST),
    };
    let set = parse_ply(&bytes)?;
    let prims = activate(&set)?;
    println!("{} Gaussians, {} bytes", prims.len(), bytes.len());

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for m in &set.means {
        for k in 0..3 {
            lo[k] = lo[k].min(f64::from(m[k]));
            hi[k] = hi[k].max(f64::from(m[k]));
        }
    }
    println!("bounds {lo:.3?} .. {hi:.3?}");

    let n = prims.len().max(1) as f64;
    let mean_opacity: f64 = prims.opacities.iter().sum::<f64>() / n;
    let max_scale = prims
        .scales
        .iter()
        .flat_map(|s| s.iter().copied())
        .fold(0.0f64, f64::max);
    println!("mean opacity {mean_opacity:.3}, largest axis scale {max_scale:.4}");
    Ok(())
}
