//! Times projection, sorting and rasterization of a large synthetic scene
//! at the cheapest ladder rung.
//!
//! cargo run --release --example bench_render -- [count] [frames]

use std::time::Instant;

use splatstream::abr::BitrateLadder;
use splatstream::model::activate;
use splatstream::render::{render_framebuffer, render_view, RenderOptions};
use splatstream::scene::{default_intrinsics, default_pose, generate, SceneSpec};
use splatstream::camera::scale_intrinsics;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100_000);
    let frames: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);

    let t = Instant::now();
    let prims = activate(&generate(&SceneSpec::with_count(count, 11)))?;
    println!("generated and activated {count} splats in {:.1} ms", t.elapsed().as_secs_f64() * 1e3);

    let ladder = BitrateLadder::default();
    let base = default_intrinsics();
    let opts = RenderOptions::default();
    for p in ladder.profiles().iter().rev() {
        let k = scale_intrinsics(&base, p.width, p.height);
        let mut best = f64::INFINITY;
        for _ in 0..frames {
            let (_, stats) = render_framebuffer(&prims, &default_pose(), &k, &opts)?;
            best = best.min(stats.render_ms);
        }
        let (jpeg, stats) = render_view(&prims, &default_pose(), &base, p, &opts)?;
        println!(
            "{:>4}x{:<4} raster best {:7.1} ms, with jpeg {:7.1} ms, {} B",
            p.width, p.height, best, stats.render_ms, jpeg.len()
        );
    }
    Ok(())
}
