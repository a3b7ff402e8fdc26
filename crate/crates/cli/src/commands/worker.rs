use anyhow::{Context, Result};
use elastic_core::worker::{self, WorkerConfig};
use serde_json::json;

use super::usage;
use crate::args::WorkerArgs;
use crate::manifest::{resolve_out, RunManifest};

pub fn run(a: WorkerArgs) -> Result<()> {
    let out = resolve_out(&a.out.out);
    let hyper = a.train.hyper();
    hyper.validate().map_err(usage)?;
    let cfg = WorkerConfig {
        exchanger_address: a.connect.clone(),
        shard_path: a.shard.clone(),
        hyper,
        worker_id: a.id,
        rng_seed: a.seed,
        metrics_path: out.clone(),
        model: a.model.clone(),
    };
    RunManifest::new("worker", json!({ "worker": cfg }))
        .seed("minibatch", a.seed)
        .artifact(cfg.metrics_file())
        .artifact(cfg.params_file())
        .write(&out)?;
    let outcome = worker::run(&cfg).with_context(|| format!("worker {}", a.id))?;
    let last = outcome.log.records.last();
    println!(
        "worker {} finished {} iterations, {} exchanges, last batch loss {:.6}; metrics in {}",
        a.id,
        outcome.log.len(),
        outcome.log.exchanges().count(),
        last.map(|r| r.batch_loss).unwrap_or(f64::NAN),
        cfg.metrics_file().display()
    );
    Ok(())
}
