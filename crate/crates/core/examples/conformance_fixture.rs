//! Replays the golden ABR decision traces and writes them as the JSON
//! fixture used by other client implementations.
//!
//! cargo run --example conformance_fixture -- [out.json]

use splatstream::abr::{golden_traces, replay};
use splatstream::server::assets::conformance_json;

fn main() -> anyhow::Result<()> {
    for t in golden_traces() {
        let ok = replay(&t)? == t.expected_levels;
        println!("{:<34} {:>3} samples  {}", t.name, t.samples.len(), if ok { "ok" } else { "MISMATCH" });
    }
    let out = std::env::args().nth(1).unwrap_or_else(|| "abr_conformance.json".into());
    std::fs::write(&out, conformance_json())?;
    println!("wrote {out}");
    Ok(())
}
