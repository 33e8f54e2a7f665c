//! Drives the latency controller over a simulated link without a server.
//! Frame sizes follow the ladder's nominal sizes; the link drops from
//! 5 Mbit/s to 0.5 Mbit/s halfway through, and a short pan happens near
//! the end.
//!
//! cargo run --example abr_trace

use splatstream::abr::{BitrateLadder, ClientAbr};

fn main() -> anyhow::Result<()> {
    let mut abr = ClientAbr::latency(BitrateLadder::default());
    let nominal: Vec<u64> = abr.ladder.profiles().iter().map(|p| p.expected_size_bytes as u64).collect();
    let rtt = 0.010;
    println!("{:>4} {:>9} {:>6} {:>9} {:>10} {:>5} {:>5}", "i", "rate kB/s", "level", "bytes", "latency ms", "pan", "hold");
    for i in 0..120 {
        let rate = if i < 60 { 625_000.0 } else { 62_500.0 };
        let panning = (100..104).contains(&i);
        let size = nominal[abr.level()];
        let duration = rtt + size as f64 / rate;
        let d = abr.on_response(size, duration, duration, panning)?;
        println!(
            "{i:>4} {:>9.1} {:>6} {size:>9} {:>10.1} {:>5} {:>5}{}",
            rate / 1000.0,
            d.level,
            duration * 1000.0,
            panning,
            d.hold_counter,
            if d.switched { "  switch" } else { "" }
        );
    }
    Ok(())
}
