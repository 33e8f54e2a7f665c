//! Writes two synthetic models into a temporary root and serves them over
//! HTTP/3 and HTTP/1.1 until Ctrl-C. Open the printed HTTP/1.1 address in
//! a browser for the web client.
//!
//! cargo run --example serve

use splatstream::scene::{write_scene, SceneSpec};
use splatstream::server::{start, ServerConfig};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let root = tempfile::tempdir()?;
    write_scene(root.path(), "small", &SceneSpec::with_count(2_000, 1))?;
    write_scene(root.path(), "large", &SceneSpec::with_count(50_000, 2))?;

    let config = ServerConfig {
        model_root: root.path().to_path_buf(),
        bind: "127.0.0.1:4433".parse()?,
        h1_bind: Some("127.0.0.1:8080".parse()?),
        ..Default::default()
    };
    let handle = start(config).await?;
    let cert = root.path().join("cert.pem");
    std::fs::write(&cert, &handle.cert_pem)?;
    println!("HTTP/3   {}  (trust {})", handle.h3_url(), cert.display());
    if let Some(url) = handle.h1_url() {
        println!("HTTP/1.1 {url}");
    }
    tokio::signal::ctrl_c().await?;
    handle.shutdown().await;
    Ok(())
}
