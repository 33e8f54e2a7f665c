use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use splatstream::abr::{BitrateLadder, ClientAbr, FixedLevel};
use splatstream::camera::Intrinsics;
use splatstream::harness::{
    export_session_report, run_session, BandwidthTrace, FrameTransport, MovementTrace, SessionOptions,
    DEFAULT_SAMPLE_STRIDE,
};
use splatstream::metrics::evaluate_session;
use splatstream::model::ModelRegistry;
use splatstream::scene::{write_scene, SceneSpec};
use splatstream::server::assets::conformance_json;
use splatstream::server::{self, ServerConfig};

#[derive(Parser)]
#[command(name = "splatstream", version, about = "Adaptive remote rendering of Gaussian splat scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve models over HTTP/3.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory with one subdirectory per model.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        bind: Option<SocketAddr>,
        #[arg(long, requires = "key")]
        cert: Option<PathBuf>,
        #[arg(long, requires = "cert")]
        key: Option<PathBuf>,
        /// Where to write the self-signed certificate clients should trust.
        #[arg(long, default_value = "splatstream-cert.pem")]
        cert_out: PathBuf,
        #[arg(long)]
        eviction_timeout: Option<f64>,
        #[arg(long)]
        eviction_period: Option<f64>,
        #[arg(long)]
        max_inflight: Option<usize>,
        /// Also listen for plain HTTP/1.1 on this address.
        #[arg(long)]
        h1: Option<SocketAddr>,
    },
    /// Replay a movement trace against a server.
    Run {
        /// `https://host:port` for HTTP/3 or `http://host:port` for HTTP/1.1.
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        model: String,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        bandwidth: Option<PathBuf>,
        #[arg(long)]
        ladder: Option<PathBuf>,
        #[arg(long, default_value = "session")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_STRIDE)]
        sample_stride: usize,
        #[arg(long)]
        virtual_time: bool,
        /// PEM certificate(s) to trust for HTTP/3.
        #[arg(long)]
        ca: Option<PathBuf>,
        /// Pin one ladder level instead of adapting.
        #[arg(long)]
        fixed_level: Option<usize>,
        #[arg(long, default_value_t = 1280)]
        width: u32,
        #[arg(long, default_value_t = 720)]
        height: u32,
        /// Horizontal field of view in degrees.
        #[arg(long, default_value_t = 60.0)]
        fov: f64,
    },
    /// Score a recorded session against lossless renders.
    Evaluate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Model root directory.
        #[arg(long, default_value = "models")]
        models: PathBuf,
    },
    /// Write a synthetic scene into a model directory.
    Scene {
        #[arg(long, default_value = "models")]
        models: PathBuf,
        #[arg(long, default_value = "synthetic")]
        id: String,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write the ABR conformance traces as JSON.
    Conformance {
        #[arg(long, default_value = "abr_conformance.json")]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let runtime = tokio::runtime::Runtime::new()?;
    match Cli::parse().command {
        Command::Serve {
            config,
            models,
            bind,
            cert,
            key,
            cert_out,
            eviction_timeout,
            eviction_period,
            max_inflight,
            h1,
        } => {
            let mut cfg = match config {
                Some(p) => ServerConfig::load(p)?,
                None => ServerConfig::default(),
            };
            cfg.model_root = models.unwrap_or(cfg.model_root);
            cfg.bind = bind.unwrap_or(cfg.bind);
            if cert.is_some() {
                cfg.cert_path = cert;
                cfg.key_path = key;
            }
            if let Some(s) = eviction_timeout {
                cfg.eviction_timeout = Duration::from_secs_f64(s);
            }
            if let Some(s) = eviction_period {
                cfg.eviction_period = Duration::from_secs_f64(s);
            }
            cfg.max_inflight = max_inflight.unwrap_or(cfg.max_inflight);
            cfg.h1_bind = h1.or(cfg.h1_bind);
            runtime.block_on(async {
                let handle = server::start(cfg).await?;
                std::fs::write(&cert_out, &handle.cert_pem)
                    .with_context(|| format!("writing {}", cert_out.display()))?;
                println!("listening on {} (certificate in {})", handle.h3_url(), cert_out.display());
                if let Some(url) = handle.h1_url() {
                    println!("HTTP/1.1 fallback on {url}");
                }
                tokio::signal::ctrl_c().await?;
                handle.shutdown().await;
                Ok(())
            })
        }
        Command::Run {
            endpoint,
            model,
            trace,
            bandwidth,
            ladder,
            out,
            sample_stride,
            virtual_time,
            ca,
            fixed_level,
            width,
            height,
            fov,
        } => {
            let movement = MovementTrace::load(&trace)?;
            let bw = bandwidth.as_ref().map(BandwidthTrace::load).transpose()?;
            let ladder = match ladder {
                Some(p) => BitrateLadder::load(p)?,
                None => BitrateLadder::default(),
            };
            let abr = match fixed_level {
                Some(l) if l < ladder.len() => ClientAbr::new(ladder, Box::new(FixedLevel(l))),
                Some(l) => bail!("level {l} outside ladder of {} rungs", ladder.len()),
                None => ClientAbr::latency(ladder),
            };
            let mut opts = SessionOptions::new(model.clone(), Intrinsics::from_fov(width, height, fov));
            opts.virtual_time = virtual_time;
            opts.sample_stride = (sample_stride > 0).then_some(sample_stride);
            opts.out_dir = Some(out.clone());
            opts.movement_name = trace.display().to_string();
            opts.bandwidth_name = bandwidth.map(|p| p.display().to_string());
            runtime.block_on(async {
                let mut transport = FrameTransport::connect_with_ca_file(&endpoint, ca.as_deref()).await?;
                let load = transport.post(&format!("/models/{model}/load"), Default::default()).await?;
                if !load.status().is_success() {
                    bail!("loading {model}: {}", String::from_utf8_lossy(load.body()));
                }
                let log = run_session(&mut transport, &movement, bw.as_ref(), abr, &opts).await?;
                transport.close().await;
                let summary = export_session_report(&log, &out)?;
                println!("{}", serde_json::to_string_pretty(&summary)?);
                Ok(())
            })
        }
        Command::Evaluate { model, session, out, models } => {
            let registry = ModelRegistry::open(&models, Duration::from_secs(300))?;
            let lease = registry.acquire(&model)?;
            let report = evaluate_session(&lease, &session, &Default::default(), true)?;
            std::fs::write(&out, serde_json::to_vec_pretty(&report)?)?;
            println!(
                "{} frames: mean PSNR {:.2} dB, mean SSIM {:.4}",
                report.overall.count, report.overall.mean_psnr, report.overall.mean_ssim
            );
            Ok(())
        }
        Command::Scene { models, id, count, seed } => {
            let path = write_scene(&models, &id, &SceneSpec::with_count(count, seed))?;
            println!("wrote {count} Gaussians to {}", path.display());
            Ok(())
        }
        Command::Conformance { out } => {
            std::fs::write(&out, conformance_json())?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
