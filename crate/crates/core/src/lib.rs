//! Server-side rendering and per-frame adaptive streaming of 3D Gaussian
//! Splatting scenes.
//!
//! A backend parses 3DGS PLY models, rasterizes pose-dependent JPEG frames on
//! the CPU and serves them over HTTP/3 (with an HTTP/1.1 fallback). Clients
//! pick a ladder rung per frame with a latency-targeting controller. The
//! harness replays movement and bandwidth traces against a server and the
//! metrics module scores the recorded frames against full-quality renders.

pub mod abr;
pub mod camera;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod render;
pub mod scene;
pub mod server;
