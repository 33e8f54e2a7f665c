//! Renders one view of a synthetic scene at every ladder rung and writes
//! the JPEGs plus a lossless reference PNG.
//!
//! cargo run --example render_view -- [count] [out_dir]

use splatstream::abr::BitrateLadder;
use splatstream::camera::{move_relative, Motion};
use splatstream::model::activate;
use splatstream::render::{encode_png, render_framebuffer, render_view, RenderOptions};
use splatstream::scene::{default_intrinsics, default_pose, generate, SceneSpec};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let count = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "render_view_out".into()));
    std::fs::create_dir_all(&out)?;

    let prims = activate(&generate(&SceneSpec::with_count(count, 7)))?;
    let base = default_intrinsics();
    let opts = RenderOptions::default();
    // Step slightly to the right so the view is not perfectly axis-aligned.
    let pose = move_relative(&default_pose(), Motion::Right, 0.25);

    let (gt, stats) = render_framebuffer(&prims, &pose, &base, &opts)?;
    std::fs::write(out.join("reference.png"), encode_png(&gt)?)?;
    println!("reference {}x{}: {} splats drawn, {:.1} ms", base.width, base.height, stats.splats_drawn, stats.render_ms);

    for p in BitrateLadder::default().profiles() {
        let (jpeg, stats) = render_view(&prims, &pose, &base, p, &opts)?;
        let name = format!("level{}_{}x{}_q{}.jpg", p.level, p.width, p.height, p.jpeg_quality);
        std::fs::write(out.join(&name), &jpeg)?;
        println!(
            "level {} {:>4}x{:<4} q{:<3} {:>7} B (expected {:>7.0}) {:6.1} ms",
            p.level,
            p.width,
            p.height,
            p.jpeg_quality,
            jpeg.len(),
            p.expected_size_bytes,
            stats.render_ms
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
