//! HTTP/3 frame server: model discovery, stateless per-frame renders and
//! the embedded browser client.

mod api;
pub mod assets;
mod h1;
mod h3;
pub mod tls;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use log::info;
use serde::Deserialize;
use tokio::sync::watch;
use tokio::task::JoinHandle;

pub use api::{error_response, Api, FieldError, RenderRequest, MAX_DIMENSION, MIN_DIMENSION};
pub use tls::TlsIdentity;

use crate::model::{ModelRegistry, DEFAULT_EVICTION_TIMEOUT};
use crate::render::RenderOptions;

pub const DEFAULT_EVICTION_PERIOD: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub model_root: PathBuf,
    pub bind: SocketAddr,
    pub cert_path: Option<PathBuf>,
    pub key_path: Option<PathBuf>,
    pub eviction_timeout: Duration,
    pub eviction_period: Duration,
    pub max_inflight: usize,
    /// Address for the HTTP/1.1 listener; `None` keeps it off.
    pub h1_bind: Option<SocketAddr>,
    pub render: RenderOptions,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            model_root: PathBuf::from("models"),
            bind: "127.0.0.1:4433".parse().expect("literal address"),
            cert_path: None,
            key_path: None,
            eviction_timeout: DEFAULT_EVICTION_TIMEOUT,
            eviction_period: DEFAULT_EVICTION_PERIOD,
            max_inflight: default_inflight(),
            h1_bind: None,
            render: RenderOptions::default(),
        }
    }
}

fn default_inflight() -> usize {
    4 * std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// On-disk form; every key is optional and overrides the default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model_root: Option<PathBuf>,
    bind: Option<SocketAddr>,
    cert: Option<PathBuf>,
    key: Option<PathBuf>,
    eviction_timeout_s: Option<f64>,
    eviction_period_s: Option<f64>,
    max_inflight: Option<usize>,
    h1_bind: Option<SocketAddr>,
    background: Option<[f64; 3]>,
    sh_degree: Option<u8>,
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let f: ConfigFile = toml::from_str(text)?;
        let d = Self::default();
        let secs = |v: Option<f64>, dflt| v.map(Duration::from_secs_f64).unwrap_or(dflt);
        Ok(Self {
            model_root: f.model_root.unwrap_or(d.model_root),
            bind: f.bind.unwrap_or(d.bind),
            cert_path: f.cert,
            key_path: f.key,
            eviction_timeout: secs(f.eviction_timeout_s, d.eviction_timeout),
            eviction_period: secs(f.eviction_period_s, d.eviction_period),
            max_inflight: f.max_inflight.unwrap_or(d.max_inflight),
            h1_bind: f.h1_bind,
            render: RenderOptions {
                background: f.background.unwrap_or(d.render.background),
                sh_degree: f.sh_degree.unwrap_or(d.render.sh_degree).min(3),
                ..d.render
            },
        })
    }

    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }
}

/// Calls `evict_due` on the registry every `period` until `stop` flips.
pub async fn run_eviction_loop(registry: ModelRegistry, period: Duration, mut stop: watch::Receiver<bool>) {
    let mut ticks = tokio::time::interval(period);
    ticks.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    ticks.tick().await;
    loop {
        tokio::select! {
            _ = ticks.tick() => {}
            _ = stop.changed() => break,
        }
        let r = registry.clone();
        if let Ok(evicted) = tokio::task::spawn_blocking(move || r.evict_due()).await {
            for id in evicted {
                info!("evicted idle model {id}");
            }
        }
    }
}

/// A running server. Dropping it without [`ServerHandle::shutdown`] aborts
/// the listeners.
pub struct ServerHandle {
    pub h3_addr: SocketAddr,
    pub h1_addr: Option<SocketAddr>,
    /// PEM of the certificate presented on the QUIC listener.
    pub cert_pem: String,
    api: Api,
    endpoint: quinn::Endpoint,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn api(&self) -> &Api {
        &self.api
    }

    pub fn registry(&self) -> &ModelRegistry {
        self.api.registry()
    }

    /// Base URL of the HTTP/3 listener.
    pub fn h3_url(&self) -> String {
        format!("https://{}", self.h3_addr)
    }

    pub fn h1_url(&self) -> Option<String> {
        self.h1_addr.map(|a| format!("http://{a}"))
    }

    /// Stops accepting, waits for in-flight renders, then unloads models.
    pub async fn shutdown(mut self) {
        let _ = self.stop.send(true);
        self.api.drain().await;
        self.endpoint.close(0u32.into(), b"shutdown");
        for t in self.tasks.drain(..) {
            let _ = t.await;
        }
        let registry = self.api.registry().clone();
        let _ = tokio::task::spawn_blocking(move || registry.unload_idle()).await;
        self.endpoint.wait_idle().await;
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

/// Scans the model root and starts the listeners.
pub async fn start(config: ServerConfig) -> anyhow::Result<ServerHandle> {
    let registry = ModelRegistry::open(&config.model_root, config.eviction_timeout)
        .with_context(|| format!("scanning {}", config.model_root.display()))?;
    start_with_registry(config, registry).await
}

/// Starts the listeners over an existing registry.
pub async fn start_with_registry(config: ServerConfig, registry: ModelRegistry) -> anyhow::Result<ServerHandle> {
    let identity = match (&config.cert_path, &config.key_path) {
        (Some(c), Some(k)) => TlsIdentity::from_pem_files(c, k)?,
        (None, None) => TlsIdentity::self_signed()?,
        _ => anyhow::bail!("cert and key must be given together"),
    };
    let cert_pem = identity.cert_pem.clone();
    let api = Api::new(registry.clone(), config.max_inflight, config.render);
    let (stop, stop_rx) = watch::channel(false);

    let endpoint = h3::bind(config.bind, identity)?;
    let h3_addr = endpoint.local_addr()?;
    let mut tasks = vec![
        tokio::spawn(h3::serve(endpoint.clone(), api.clone(), stop_rx.clone())),
        tokio::spawn(run_eviction_loop(registry, config.eviction_period, stop_rx.clone())),
    ];
    let h1_addr = match config.h1_bind {
        Some(addr) => {
            let listener = tokio::net::TcpListener::bind(addr).await?;
            let local = listener.local_addr()?;
            tasks.push(tokio::spawn(h1::serve(listener, api.clone(), stop_rx)));
            Some(local)
        }
        None => None,
    };
    info!("serving HTTP/3 on {h3_addr}");
    if let Some(a) = h1_addr {
        info!("serving HTTP/1.1 on {a}");
    }
    Ok(ServerHandle { h3_addr, h1_addr, cert_pem, api, endpoint, stop, tasks })
}
