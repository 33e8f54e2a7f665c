use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BandwidthTrace, FrameTransport, HarnessError, MovementTrace, TokenBucketShaper};
use crate::abr::{ClientAbr, PanningDetector, QualityProfile};
use crate::camera::{scale_intrinsics, Intrinsics};
use crate::server::RenderRequest;

/// Round-trip time charged to every request in virtual-time runs.
pub const VIRTUAL_RTT_S: f64 = 0.010;
pub const DEFAULT_SAMPLE_STRIDE: usize = 10;

#[derive(Debug, Clone)]
pub struct SessionOptions {
    pub model_id: String,
    /// Full-resolution intrinsics; each request rescales them to its rung.
    pub base_intrinsics: Intrinsics,
    pub virtual_time: bool,
    pub rtt_s: f64,
    /// Keep every `s`-th successful frame, starting with frame 1.
    pub sample_stride: Option<usize>,
    /// Where sampled frames go; sampling is off without it.
    pub out_dir: Option<PathBuf>,
    pub movement_name: String,
    pub bandwidth_name: Option<String>,
}

impl SessionOptions {
    pub fn new(model_id: impl Into<String>, base_intrinsics: Intrinsics) -> Self {
        Self {
            model_id: model_id.into(),
            base_intrinsics,
            virtual_time: true,
            rtt_s: VIRTUAL_RTT_S,
            sample_stride: None,
            out_dir: None,
            movement_name: "movement".into(),
            bandwidth_name: None,
        }
    }
}

/// One issued request. Times are seconds since session start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub t_send: f64,
    pub t_recv: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub level: usize,
    pub width: u32,
    pub height: u32,
    pub jpeg_quality: u8,
    pub bytes: u64,
    pub render_ms: f64,
    pub ema_bps: f64,
    pub panning: bool,
    pub status: u16,
    pub error: Option<String>,
}

impl FrameRecord {
    pub fn is_ok(&self) -> bool {
        self.status == 200
    }

    pub fn latency(&self) -> f64 {
        self.t_recv - self.t_send
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFrame {
    pub frame_id: u64,
    /// Position in [`SessionLog::records`].
    pub index: usize,
    pub level: usize,
    pub width: u32,
    pub height: u32,
    /// Path relative to the session directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub model_id: String,
    pub policy: String,
    pub protocol: String,
    pub movement_trace: String,
    pub bandwidth_trace: Option<String>,
    pub virtual_time: bool,
    pub base_intrinsics: Intrinsics,
    pub ladder: Vec<QualityProfile>,
    pub sample_stride: Option<usize>,
    /// Set when the server became unreachable mid-session.
    pub aborted: Option<String>,
    pub records: Vec<FrameRecord>,
    pub samples: Vec<SampledFrame>,
}

impl SessionLog {
    pub fn ok_records(&self) -> impl Iterator<Item = &FrameRecord> {
        self.records.iter().filter(|r| r.is_ok())
    }
}

fn header_f64(resp: &http::Response<bytes::Bytes>, name: &str) -> Option<f64> {
    resp.headers().get(name)?.to_str().ok()?.parse().ok()
}

/// Replays a movement trace, one strictly serialized request per entry.
///
/// Under virtual time a request is sent at `max(entry time, previous
/// receive)` and takes `rtt` plus the shaped transfer time of its body;
/// server processing time is not charged. Otherwise wall-clock time is used
/// and shaping adds the transfer delay on top of the measured latency.
pub async fn run_session(
    transport: &mut FrameTransport,
    movement: &MovementTrace,
    bandwidth: Option<&BandwidthTrace>,
    mut abr: ClientAbr,
    opts: &SessionOptions,
) -> Result<SessionLog, HarnessError> {
    let mut log = SessionLog {
        model_id: opts.model_id.clone(),
        policy: abr.policy_name().to_owned(),
        protocol: transport.protocol().to_owned(),
        movement_trace: opts.movement_name.clone(),
        bandwidth_trace: opts.bandwidth_name.clone(),
        virtual_time: opts.virtual_time,
        base_intrinsics: opts.base_intrinsics,
        ladder: abr.ladder.profiles().to_vec(),
        sample_stride: opts.sample_stride,
        aborted: None,
        records: Vec::with_capacity(movement.len()),
        samples: Vec::new(),
    };
    let frames_dir = match (&opts.out_dir, opts.sample_stride) {
        (Some(dir), Some(s)) if s > 0 => {
            let d = dir.join("frames");
            std::fs::create_dir_all(&d)?;
            Some((d, s))
        }
        _ => None,
    };
    let mut shaper = bandwidth.map(TokenBucketShaper::new);
    let mut panning = PanningDetector::default();
    let started = Instant::now();
    let mut prev_recv = 0.0f64;

    for (i, entry) in movement.entries.iter().enumerate() {
        let frame_id = i as u64 + 1;
        let pose = entry.pose();
        let is_panning = panning.observe(&pose);
        let level = abr.level();
        let profile = *abr.profile();
        let k = scale_intrinsics(&opts.base_intrinsics, profile.width, profile.height);
        let req = RenderRequest {
            model_id: opts.model_id.clone(),
            azimuth: entry.azimuth_deg,
            elevation: entry.elevation_deg,
            translation: [entry.tx, entry.ty, entry.tz],
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            jpeg_quality: profile.jpeg_quality,
            frame_id,
        };

        let t_entry = entry.t_ms / 1e3;
        let t_send = if opts.virtual_time {
            t_entry.max(prev_recv)
        } else {
            let target = Duration::from_secs_f64(t_entry);
            if let Some(wait) = target.checked_sub(started.elapsed()) {
                tokio::time::sleep(wait).await;
            }
            started.elapsed().as_secs_f64()
        };

        let mut record = FrameRecord {
            frame_id,
            t_send,
            t_recv: t_send,
            azimuth_deg: entry.azimuth_deg,
            elevation_deg: entry.elevation_deg,
            tx: entry.tx,
            ty: entry.ty,
            tz: entry.tz,
            level,
            width: profile.width,
            height: profile.height,
            jpeg_quality: profile.jpeg_quality,
            bytes: 0,
            render_ms: 0.0,
            ema_bps: abr.estimator.ema().unwrap_or(0.0),
            panning: is_panning,
            status: 0,
            error: None,
        };

        let resp = match transport.post("/render", req.to_json().into()).await {
            Ok(r) => r,
            Err(e) => {
                record.t_recv = if opts.virtual_time { t_send + opts.rtt_s } else { started.elapsed().as_secs_f64() };
                record.error = Some(e.to_string());
                log.aborted = Some(e.to_string());
                log.records.push(record);
                break;
            }
        };
        let measured = started.elapsed().as_secs_f64();
        record.status = resp.status().as_u16();
        record.render_ms = header_f64(&resp, "x-render-ms").unwrap_or(0.0);
        let body = resp.body();
        let bytes = body.len() as u64;

        if !resp.status().is_success() {
            record.t_recv = if opts.virtual_time { t_send + opts.rtt_s } else { measured };
            record.error = Some(
                serde_json::from_slice::<serde_json::Value>(body)
                    .ok()
                    .and_then(|v| v.get("error").and_then(|e| e.as_str()).map(str::to_owned))
                    .unwrap_or_else(|| format!("HTTP {}", record.status)),
            );
            prev_recv = record.t_recv;
            log.records.push(record);
            continue;
        }

        let declared = header_f64(&resp, "content-length").map(|v| v as u64);
        if declared != Some(bytes) {
            record.error = Some(format!("content-length {declared:?} but body has {bytes} bytes"));
        }
        record.bytes = bytes;
        record.t_recv = if opts.virtual_time {
            let start = t_send + opts.rtt_s;
            shaper.as_mut().map_or(start, |s| s.deliver(bytes, start))
        } else {
            match shaper.as_mut() {
                Some(s) => {
                    let done = s.deliver(bytes, t_send);
                    if done > measured {
                        tokio::time::sleep(Duration::from_secs_f64(done - measured)).await;
                    }
                    done.max(measured)
                }
                None => measured,
            }
        };
        let duration = record.latency();
        match abr.on_response(bytes, duration, duration, is_panning) {
            Ok(_) => record.ema_bps = abr.estimator.ema().unwrap_or(0.0),
            Err(e) => record.error = Some(e.to_string()),
        }

        if let Some((dir, stride)) = &frames_dir {
            if (frame_id - 1) % *stride as u64 == 0 {
                let file = format!("frames/{frame_id:06}.jpg");
                std::fs::write(dir.join(format!("{frame_id:06}.jpg")), body)?;
                log.samples.push(SampledFrame {
                    frame_id,
                    index: log.records.len(),
                    level,
                    width: profile.width,
                    height: profile.height,
                    file,
                });
            }
        }
        prev_recv = record.t_recv;
        log.records.push(record);
    }
    Ok(log)
}
