//! Records a short in-process session at a fixed level per run and scores
//! the sampled frames against lossless full-resolution renders.
//!
//! cargo run --example evaluate

use std::time::Duration;

use splatstream::abr::{BitrateLadder, ClientAbr, FixedLevel};
use splatstream::harness::{export_session_report, run_session, FrameTransport, MovementTrace, SessionOptions};
use splatstream::metrics::evaluate_session;
use splatstream::model::ModelRegistry;
use splatstream::render::RenderOptions;
use splatstream::scene::{default_intrinsics, write_scene, SceneSpec};
use splatstream::server::Api;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let root = tempfile::tempdir()?;
    write_scene(root.path(), "demo", &SceneSpec::with_count(3_000, 11))?;
    let registry = ModelRegistry::open(root.path(), Duration::from_secs(300))?;
    let api = Api::new(registry.clone(), 4, RenderOptions::default());
    let movement = MovementTrace::orbit(20, 100.0, 4.0, 30.0);
    let ladder = BitrateLadder::default();
    let lease = registry.acquire("demo")?;

    println!("{:>5} {:>9} {:>10} {:>8}", "level", "size", "PSNR dB", "SSIM");
    for level in 0..ladder.len() {
        let dir = root.path().join(format!("session_l{level}"));
        let mut opts = SessionOptions::new("demo", default_intrinsics());
        opts.sample_stride = Some(5);
        opts.out_dir = Some(dir.clone());
        let abr = ClientAbr::new(ladder.clone(), Box::new(FixedLevel(level)));
        let mut transport = FrameTransport::InProcess(api.clone());
        let log = run_session(&mut transport, &movement, None, abr, &opts).await?;
        export_session_report(&log, &dir)?;
        let report = evaluate_session(&lease, &dir, &RenderOptions::default(), false)?;
        let p = ladder.profile(level);
        println!(
            "{level:>5} {:>9} {:>10.2} {:>8.4}",
            format!("{}x{}", p.width, p.height),
            report.overall.mean_psnr,
            report.overall.mean_ssim
        );
    }
    Ok(())
}
