use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use elastic_core::data::{partition, train_test_split, write_shard, DataShard};
use elastic_core::exchanger::{serve, ExchangerConfig};
use elastic_core::worker::{read_params, spill_shard, write_params};
use elastic_core::{CommPeriod, Hyperparams, Model};
use log::{error, info};
use serde_json::json;

use super::{model_for, source_dataset, usage};
use crate::args::LaunchArgs;
use crate::manifest::{resolve_out, RunManifest};

pub const SUMMARY_FILE: &str = "summary.json";

struct Seeds {
    data: u64,
    split: u64,
    partition: u64,
    init: u64,
}

impl Seeds {
    fn from(seed: u64) -> Self {
        Self {
            data: seed,
            split: seed.wrapping_add(1),
            partition: seed.wrapping_add(2),
            init: seed.wrapping_add(3),
        }
    }

    fn worker(base: u64, i: usize) -> u64 {
        base.wrapping_add(100 + i as u64)
    }
}

fn worker_command(
    exe: &Path,
    addr: &str,
    shard: &Path,
    hyper: &Hyperparams,
    model: &Model,
    id: usize,
    seed: u64,
    out: &Path,
) -> Command {
    let mut cmd = Command::new(exe);
    cmd.arg("worker")
        .args(["--connect", addr])
        .arg("--shard")
        .arg(shard)
        .args(["--eta", &hyper.eta.to_string()])
        .args(["--alpha", &hyper.alpha.to_string()])
        .args(["--iters", &hyper.i_max.to_string()])
        .args(["--batch", &hyper.batch_size.to_string()])
        .args(["--weight-decay", &hyper.weight_decay.to_string()])
        .args(["--id", &id.to_string()])
        .args(["--seed", &seed.to_string()])
        .args(["--model", &model.to_string()])
        .arg("--out")
        .arg(out);
    match hyper.period {
        CommPeriod::Fixed { tau } => {
            cmd.args(["--tau", &tau.to_string()]);
        }
        CommPeriod::Adaptive { loss_cut } => {
            cmd.arg("--adaptive");
            if let Some(cut) = loss_cut {
                cmd.args(["--loss-cut", &cut.to_string()]);
            }
        }
    }
    cmd.stdout(Stdio::null());
    cmd
}

fn kill_all(children: &mut [(usize, Child)]) {
    for (_, c) in children.iter_mut() {
        let _ = c.kill();
        let _ = c.wait();
    }
}

/// Waits for every child; the first failure or the deadline kills the rest.
fn supervise(mut children: Vec<(usize, Child)>, timeout: Duration) -> Result<()> {
    let deadline = Instant::now() + timeout;
    while !children.is_empty() {
        let mut i = 0;
        while i < children.len() {
            match children[i].1.try_wait()? {
                Some(status) if status.success() => {
                    info!("worker {} finished", children[i].0);
                    children.swap_remove(i);
                }
                Some(status) => {
                    let id = children[i].0;
                    children.swap_remove(i);
                    kill_all(&mut children);
                    bail!("worker {id} failed with {status}");
                }
                None => i += 1,
            }
        }
        if Instant::now() > deadline {
            kill_all(&mut children);
            bail!("workers did not finish within {timeout:?}");
        }
        thread::sleep(Duration::from_millis(20));
    }
    Ok(())
}

pub fn run(a: LaunchArgs) -> Result<()> {
    if a.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    let hyper = a.train.hyper();
    hyper.validate().map_err(usage)?;
    let out = resolve_out(&a.out.out);
    let seeds = Seeds::from(a.seed);
    let dataset = source_dataset(&a.source, seeds.data)?;
    let model = model_for(&a.model, &dataset)?;
    let (train, test) = train_test_split(&dataset, a.test_fraction, seeds.split).map_err(usage)?;
    let shard_dir = out.join("shards");
    let worker_dirs: Vec<PathBuf> = (0..a.workers)
        .map(|i| out.join(format!("worker_{i}")))
        .collect();

    let mut manifest = RunManifest::new(
        "launch-local",
        json!({
            "workers": a.workers,
            "hyper": hyper,
            "model": model.to_string(),
            "data": a.source.data,
            "synthetic": a.source.data.is_none().then(|| a.source.synthetic.spec(seeds.data)),
            "mode": elastic_core::exchanger::UpdateMode::from(a.mode),
            "pool_size": a.pool_size,
            "test_fraction": a.test_fraction,
        }),
    )
    .seed("data", seeds.data)
    .seed("split", seeds.split)
    .seed("partition", seeds.partition)
    .seed("init", seeds.init)
    .artifact(out.join("test.dshd"))
    .artifact(out.join("master.params"))
    .artifact(out.join(SUMMARY_FILE));
    for (i, dir) in worker_dirs.iter().enumerate() {
        manifest = manifest
            .seed(&format!("worker_{i}"), Seeds::worker(a.seed, i))
            .artifact(shard_dir.join(format!("shard_{i}.dshd")))
            .artifact(dir.join(format!("worker_{i}.csv")));
    }
    manifest.write(&out)?;

    let shards = partition(&train, a.workers, seeds.partition).map_err(usage)?;
    let shard_paths = shards
        .iter()
        .enumerate()
        .map(|(i, s)| spill_shard(s, &shard_dir, i))
        .collect::<elastic_core::Result<Vec<_>>>()?;
    write_shard(
        &DataShard {
            dataset: test.clone(),
            seed: seeds.split,
        },
        &out.join("test.dshd"),
    )?;

    let mut cfg = ExchangerConfig::new("127.0.0.1:0", model.clone(), hyper.alpha);
    cfg.pool_size = a.pool_size;
    cfg.update_mode = a.mode.into();
    cfg.init_seed = seeds.init;
    let handle = serve(cfg).context("starting exchanger")?;
    let addr = handle.local_addr().to_string();
    info!(
        "exchanger listening on {addr}; launching {} workers",
        a.workers
    );

    let exe = std::env::current_exe().context("locating own executable")?;
    let started = Instant::now();
    let mut children = Vec::with_capacity(a.workers);
    for (i, (shard, dir)) in shard_paths.iter().zip(&worker_dirs).enumerate() {
        let mut cmd = worker_command(
            &exe,
            &addr,
            shard,
            &hyper,
            &model,
            i,
            Seeds::worker(a.seed, i),
            dir,
        );
        match cmd.spawn() {
            Ok(child) => children.push((i, child)),
            Err(e) => {
                kill_all(&mut children);
                return Err(anyhow::Error::new(e).context(format!("spawning worker {i}")));
            }
        }
    }
    if let Err(e) = supervise(children, Duration::from_secs(a.timeout_secs)) {
        error!("{e:#}");
        return Err(e);
    }
    let elapsed = started.elapsed();

    let master = handle.fetch_initial();
    let stats = handle.stats();
    handle.shutdown();
    write_params(&master, &out.join("master.params"))?;
    let held_out = model.accuracy(&master, test.features(), test.labels())?;
    let worker_acc = worker_dirs
        .iter()
        .enumerate()
        .map(|(i, dir)| {
            let params = read_params(&dir.join(format!("worker_{i}.params")))?;
            Ok(model.accuracy(&params, test.features(), test.labels())?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let summary = json!({
        "held_out_accuracy": held_out,
        "worker_held_out_accuracy": worker_acc,
        "exchange_count": stats.exchange_count,
        "iterations_per_worker": hyper.i_max,
        "elapsed_ms": elapsed.as_millis() as u64,
    });
    fs::write(
        out.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "held_out_accuracy={held_out:.6} exchanges={} elapsed_ms={} out={}",
        stats.exchange_count,
        elapsed.as_millis(),
        out.display()
    );
    Ok(())
}
