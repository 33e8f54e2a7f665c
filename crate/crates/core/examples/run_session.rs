//! End-to-end loopback: starts a server, replays a 100-pose orbit over
//! HTTP/3 under virtual time with a 5 to 0.5 Mbit/s bandwidth step at 5 s,
//! and prints the per-frame ABR trace and the session summary.
//!
//! cargo run --example run_session -- [out_dir]

use splatstream::abr::{BitrateLadder, ClientAbr};
use splatstream::harness::{
    export_session_report, run_session, BandwidthTrace, FrameTransport, MovementTrace, SessionOptions,
};
use splatstream::scene::{default_intrinsics, write_scene, SceneSpec};
use splatstream::server::{start, ServerConfig};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "run_session_out".into()));
    let root = tempfile::tempdir()?;
    write_scene(root.path(), "demo", &SceneSpec::with_count(1_000, 5))?;
    let handle = start(ServerConfig {
        model_root: root.path().to_path_buf(),
        bind: "127.0.0.1:0".parse()?,
        ..Default::default()
    })
    .await?;

    let mut transport = FrameTransport::connect(&handle.h3_url(), Some(handle.cert_pem.as_bytes())).await?;
    transport.post("/models/demo/load", Default::default()).await?;

    let movement = MovementTrace::orbit(100, 100.0, 4.0, 90.0);
    let bandwidth = BandwidthTrace::step(5_000.0, 500.0, 5_000.0);
    let mut opts = SessionOptions::new("demo", default_intrinsics());
    opts.sample_stride = Some(10);
    opts.out_dir = Some(out.clone());
    opts.movement_name = "orbit-100".into();
    opts.bandwidth_name = Some("step-5000-500".into());

    let log = run_session(&mut transport, &movement, Some(&bandwidth), ClientAbr::latency(BitrateLadder::default()), &opts)
        .await?;
    transport.close().await;

    for r in &log.records {
        println!(
            "{:>3} t={:6.3}s level {} {:>4}x{:<3} {:>6} B {:6.1} ms",
            r.frame_id,
            r.t_send,
            r.level,
            r.width,
            r.height,
            r.bytes,
            r.latency() * 1000.0
        );
    }
    let summary = export_session_report(&log, &out)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    handle.shutdown().await;
    Ok(())
}
