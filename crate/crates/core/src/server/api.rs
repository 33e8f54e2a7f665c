//! Transport-independent request routing.

use std::sync::Arc;

use bytes::Bytes;
use http::{header, Method, Request, Response, StatusCode};
use serde::Serialize;
use serde_json::{json, Map, Value};
use tokio::sync::Semaphore;

use super::assets;
use crate::camera::{CameraPose, Intrinsics};
use crate::model::{ModelError, ModelRegistry};
use crate::render::{render_frame, RenderError, RenderOptions};

pub const MIN_DIMENSION: u32 = 64;
pub const MAX_DIMENSION: u32 = 4096;

/// Body of `POST /render`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderRequest {
    pub model_id: String,
    pub azimuth: f64,
    pub elevation: f64,
    pub translation: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub jpeg_quality: u8,
    pub frame_id: u64,
}

/// A request body that failed validation, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn field<'a>(map: &'a Map<String, Value>, name: &'static str) -> Result<&'a Value, FieldError> {
    map.get(name).ok_or(FieldError { field: name, message: "missing".into() })
}

fn real(map: &Map<String, Value>, name: &'static str) -> Result<f64, FieldError> {
    field(map, name)?
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or(FieldError { field: name, message: "must be a finite number".into() })
}

fn integer(map: &Map<String, Value>, name: &'static str, lo: u64, hi: u64) -> Result<u64, FieldError> {
    field(map, name)?
        .as_u64()
        .filter(|v| (lo..=hi).contains(v))
        .ok_or(FieldError { field: name, message: format!("must be an integer in [{lo}, {hi}]") })
}

impl RenderRequest {
    /// Parses and validates a JSON body.
    pub fn from_json(body: &[u8]) -> Result<Self, FieldError> {
        let value: Value = serde_json::from_slice(body)
            .map_err(|e| FieldError { field: "body", message: format!("invalid JSON: {e}") })?;
        let map = value
            .as_object()
            .ok_or(FieldError { field: "body", message: "expected a JSON object".into() })?;

        let model_id = field(map, "model_id")?
            .as_str()
            .filter(|s| !s.is_empty())
            .ok_or(FieldError { field: "model_id", message: "must be a non-empty string".into() })?
            .to_owned();
        let bad_translation =
            || FieldError { field: "translation", message: "must be an array of 3 finite numbers".into() };
        let t = field(map, "translation")?.as_array().ok_or_else(bad_translation)?;
        if t.len() != 3 {
            return Err(bad_translation());
        }
        let mut translation = [0.0; 3];
        for (dst, v) in translation.iter_mut().zip(t) {
            *dst = v.as_f64().filter(|v| v.is_finite()).ok_or_else(bad_translation)?;
        }

        let width = integer(map, "width", MIN_DIMENSION.into(), MAX_DIMENSION.into())? as u32;
        let height = integer(map, "height", MIN_DIMENSION.into(), MAX_DIMENSION.into())? as u32;
        let positive = |name: &'static str| {
            real(map, name).and_then(|v| {
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(FieldError { field: name, message: "must be positive".into() })
                }
            })
        };
        let within = |name: &'static str, hi: u32| {
            real(map, name).and_then(|v| {
                if (0.0..=f64::from(hi)).contains(&v) {
                    Ok(v)
                } else {
                    Err(FieldError { field: name, message: format!("must lie in [0, {hi}]") })
                }
            })
        };

        Ok(Self {
            model_id,
            azimuth: real(map, "azimuth")?,
            elevation: real(map, "elevation")?,
            translation,
            fx: positive("fx")?,
            fy: positive("fy")?,
            cx: within("cx", width)?,
            cy: within("cy", height)?,
            width,
            height,
            jpeg_quality: integer(map, "jpeg_quality", 1, 100)? as u8,
            frame_id: integer(map, "frame_id", 0, u64::MAX)?,
        })
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("request serializes")
    }

    pub fn pose(&self) -> CameraPose {
        CameraPose::from_degrees(self.azimuth, self.elevation, self.translation)
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        }
    }
}

/// Shared state behind every listener.
#[derive(Clone)]
pub struct Api {
    registry: ModelRegistry,
    permits: Arc<Semaphore>,
    max_inflight: usize,
    options: RenderOptions,
}

impl Api {
    pub fn new(registry: ModelRegistry, max_inflight: usize, options: RenderOptions) -> Self {
        let max_inflight = max_inflight.max(1);
        Self {
            registry,
            permits: Arc::new(Semaphore::new(max_inflight)),
            max_inflight,
            options,
        }
    }

    pub fn registry(&self) -> &ModelRegistry {
        &self.registry
    }

    /// Waits for every admitted render to finish and stops admitting new ones.
    pub async fn drain(&self) {
        if let Ok(all) = self.permits.acquire_many(self.max_inflight as u32).await {
            all.forget();
        }
        self.permits.close();
    }

    pub async fn handle(&self, req: Request<Bytes>) -> Response<Bytes> {
        let path = req.uri().path().to_owned();
        let segments: Vec<&str> = path.trim_start_matches('/').split('/').collect();
        let method = req.method().clone();
        match (&method, segments.as_slice()) {
            (&Method::GET, [""]) => asset_response("index.html"),
            (&Method::GET, ["healthz"]) => json_response(StatusCode::OK, &json!({"status": "ok"})),
            (&Method::GET, ["models"]) => self.models_list(),
            (&Method::POST, ["models", id, "load"]) => self.model_load(id).await,
            (&Method::GET, ["models", id, "preview"]) => self.preview(id).await,
            (&Method::POST, ["render"]) => self.render(req.into_body()).await,
            (&Method::GET, ["static", rest @ ..]) => asset_response(&rest.join("/")),
            (_, ["" | "healthz" | "models" | "render" | "static", ..]) if known_path(&segments) => {
                error_response(StatusCode::METHOD_NOT_ALLOWED, format!("{method} not allowed on {path}"))
            }
            _ => error_response(StatusCode::NOT_FOUND, format!("no route for {path}")),
        }
    }

    fn models_list(&self) -> Response<Bytes> {
        let list: Vec<Value> = self
            .registry
            .records()
            .into_iter()
            .map(|r| {
                let preview = r.preview_path.as_ref().map(|_| format!("/models/{}/preview", r.id));
                json!({"id": r.id, "name": r.name, "state": r.state.as_str(), "preview_url": preview})
            })
            .collect();
        json_response(StatusCode::OK, &Value::Array(list))
    }

    async fn model_load(&self, id: &str) -> Response<Bytes> {
        let registry = self.registry.clone();
        let owned = id.to_owned();
        match tokio::task::spawn_blocking(move || registry.load(&owned)).await {
            Ok(Ok(state)) => json_response(StatusCode::OK, &json!({"id": id, "state": state.as_str()})),
            Ok(Err(e)) => model_error_response(e),
            Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }

    async fn preview(&self, id: &str) -> Response<Bytes> {
        let Some(record) = self.registry.record(id) else {
            return error_response(StatusCode::NOT_FOUND, format!("unknown model {id}"));
        };
        let Some(path) = record.preview_path else {
            return error_response(StatusCode::NOT_FOUND, format!("model {id} has no preview"));
        };
        match tokio::fs::read(&path).await {
            Ok(bytes) => body_response(StatusCode::OK, "image/jpeg", bytes.into()),
            Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }

    async fn render(&self, body: Bytes) -> Response<Bytes> {
        let req = match RenderRequest::from_json(&body) {
            Ok(r) => r,
            Err(e) => return error_response(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        };
        if self.registry.record(&req.model_id).is_none() {
            return error_response(StatusCode::NOT_FOUND, format!("unknown model {}", req.model_id));
        }
        let Ok(_permit) = self.permits.clone().acquire_owned().await else {
            return error_response(StatusCode::SERVICE_UNAVAILABLE, "server is shutting down".into());
        };
        let registry = self.registry.clone();
        let options = self.options;
        let job = tokio::task::spawn_blocking(move || -> Result<_, RenderJobError> {
            let lease = registry.acquire(&req.model_id)?;
            let out = render_frame(&lease, &req.pose(), &req.intrinsics(), req.jpeg_quality, &options)?;
            drop(lease);
            Ok((out, req.frame_id))
        });
        match job.await {
            Ok(Ok(((jpeg, stats), frame_id))) => {
                let mut resp = body_response(StatusCode::OK, "image/jpeg", jpeg.into());
                let headers = resp.headers_mut();
                headers.insert("x-render-ms", format!("{:.3}", stats.render_ms).parse().unwrap());
                headers.insert("x-frame-id", frame_id.into());
                resp
            }
            Ok(Err(RenderJobError::Model(e))) => model_error_response(e),
            Ok(Err(RenderJobError::Render(e))) => {
                error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
            }
            Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }
}

enum RenderJobError {
    Model(ModelError),
    Render(RenderError),
}

impl From<ModelError> for RenderJobError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}

impl From<RenderError> for RenderJobError {
    fn from(e: RenderError) -> Self {
        Self::Render(e)
    }
}

fn known_path(segments: &[&str]) -> bool {
    matches!(
        segments,
        [""] | ["healthz"] | ["models"] | ["models", _, "load" | "preview"] | ["render"] | ["static", ..]
    )
}

fn model_error_response(e: ModelError) -> Response<Bytes> {
    let status = match e {
        ModelError::UnknownModel(_) => StatusCode::NOT_FOUND,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    error_response(status, e.to_string())
}

fn asset_response(name: &str) -> Response<Bytes> {
    match assets::lookup(name) {
        Some((content_type, body)) => body_response(StatusCode::OK, content_type, body),
        None => error_response(StatusCode::NOT_FOUND, format!("no asset {name}")),
    }
}

fn body_response(status: StatusCode, content_type: &str, body: Bytes) -> Response<Bytes> {
    Response::builder()
        .status(status)
        .header(header::CONTENT_TYPE, content_type)
        .header(header::CONTENT_LENGTH, body.len())
        .header(header::CACHE_CONTROL, "no-store")
        .body(body)
        .expect("static response parts are valid")
}

fn json_response(status: StatusCode, value: &Value) -> Response<Bytes> {
    body_response(status, "application/json", serde_json::to_vec(value).expect("json").into())
}

pub fn error_response(status: StatusCode, message: String) -> Response<Bytes> {
    json_response(status, &json!({ "error": message }))
}
