use std::fs;
use std::thread;
use std::time::Duration;

use anyhow::{Context, Result};
use elastic_core::exchanger::{serve, ExchangerConfig};
use elastic_core::worker::write_params;
use log::info;
use serde_json::json;

use super::usage;
use crate::args::ExchangerArgs;
use crate::manifest::{resolve_out, RunManifest};

pub fn run(a: ExchangerArgs) -> Result<()> {
    let out = resolve_out(&a.out.out);
    let mut cfg = ExchangerConfig::new(a.bind.clone(), a.model.clone(), a.alpha);
    cfg.pool_size = a.pool_size;
    cfg.update_mode = a.mode.into();
    cfg.init_seed = a.seed;
    cfg.idle_timeout = Duration::from_secs(a.idle_timeout_secs);
    let master_file = out.join("master.params");
    let mut manifest = RunManifest::new(
        "exchanger",
        json!({ "exchanger": cfg, "model_spec": a.model.to_string(), "stop_after": a.stop_after }),
    )
    .seed("init", a.seed);
    if a.stop_after.is_some() {
        manifest = manifest.artifact(&master_file);
    }
    manifest.write(&out)?;

    let handle = serve(cfg).map_err(|e| match e {
        elastic_core::Error::InvalidArgument(_) => usage(e),
        other => anyhow::Error::new(other).context(format!("starting exchanger on {}", a.bind)),
    })?;
    let addr = handle.local_addr();
    println!("listening on {addr}");
    if let Some(path) = &a.addr_file {
        fs::write(path, addr.to_string()).with_context(|| format!("writing {}", path.display()))?;
    }
    info!(
        "exchanger serving {} ({} parameters) on {addr}",
        a.model,
        a.model.param_dim()
    );
    loop {
        thread::sleep(Duration::from_millis(100));
        if let Some(limit) = a.stop_after {
            if handle.stats().exchange_count >= limit {
                break;
            }
        }
    }
    let master = handle.fetch_initial();
    let stats = handle.stats();
    handle.shutdown();
    write_params(&master, &master_file)?;
    println!(
        "stopped after {} exchanges; master saved to {}",
        stats.exchange_count,
        master_file.display()
    );
    Ok(())
}
