use std::sync::OnceLock;

use bytes::Bytes;

use crate::abr::golden_traces;

const INDEX_HTML: &str = include_str!("../../assets/index.html");
const APP_JS: &str = include_str!("../../assets/app.js");
const STYLE_CSS: &str = include_str!("../../assets/style.css");

/// File name of the ABR decision-trace fixture under `/static`.
pub const CONFORMANCE_FILE: &str = "abr_conformance.json";

/// Pretty-printed golden decision traces.
pub fn conformance_json() -> &'static str {
    static JSON: OnceLock<String> = OnceLock::new();
    JSON.get_or_init(|| {
        let mut s = serde_json::to_string_pretty(&golden_traces()).expect("traces serialize");
        s.push('\n');
        s
    })
}

/// Content type and body of an embedded asset.
pub fn lookup(name: &str) -> Option<(&'static str, Bytes)> {
    let (ty, body) = match name {
        "index.html" => ("text/html; charset=utf-8", INDEX_HTML),
        "app.js" => ("text/javascript; charset=utf-8", APP_JS),
        "style.css" => ("text/css; charset=utf-8", STYLE_CSS),
        CONFORMANCE_FILE => ("application/json", conformance_json()),
        _ => return None,
    };
    Some((ty, Bytes::from_static(body.as_bytes())))
}
