use anyhow::{Context, Result};
use elastic_core::exchanger::ExchangerClient;
use serde_json::json;

use crate::args::StatsArgs;
use crate::manifest::{resolve_out, RunManifest};

pub fn run(a: StatsArgs) -> Result<()> {
    let out = resolve_out(&a.out.out);
    RunManifest::new("stats", json!({ "connect": a.connect })).write(&out)?;
    let mut client = ExchangerClient::connect(&a.connect)
        .with_context(|| format!("connecting to {}", a.connect))?;
    let s = client.stats()?;
    println!(
        "exchange_count={} queue_depth={} uptime_ms={}",
        s.exchange_count, s.queue_depth, s.uptime_ms
    );
    Ok(())
}
