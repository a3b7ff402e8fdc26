//! The training executor: local SGD over a shard with periodic or
//! loss-driven elastic exchanges against a remote exchanger.

mod log;
mod trainer;

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use ::log::{info, warn};
use serde::{Deserialize, Serialize};

pub use self::log::{TrainLog, TrainRecord, CSV_HEADER};
pub use self::trainer::{should_exchange, BatchSampler, LocalTrainer, PeriodStep, PeriodTracker};

use crate::data::{read_shard, write_shard, DataShard};
use crate::error::{invalid, Error, Result};
use crate::exchanger::ExchangerClient;
use crate::optim::{Hyperparams, Model, ParamVector};

/// Attempts per exchange before the worker gives up.
pub const EXCHANGE_ATTEMPTS: u32 = 3;
const BACKOFF_BASE: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkerConfig {
    pub exchanger_address: String,
    pub shard_path: PathBuf,
    pub hyper: Hyperparams,
    pub worker_id: u32,
    pub rng_seed: u64,
    /// Directory receiving `worker_<id>.csv` and `worker_<id>.params`.
    pub metrics_path: PathBuf,
    /// Defaults to softmax regression over the shard's dimensions.
    pub model: Option<Model>,
}

impl WorkerConfig {
    pub fn metrics_file(&self) -> PathBuf {
        self.metrics_path
            .join(format!("worker_{}.csv", self.worker_id))
    }

    pub fn params_file(&self) -> PathBuf {
        self.metrics_path
            .join(format!("worker_{}.params", self.worker_id))
    }
}

#[derive(Debug, Clone)]
pub struct WorkerOutcome {
    pub log: TrainLog,
    pub final_params: ParamVector,
}

/// Runs the full training loop against a live exchanger.
pub fn run(config: &WorkerConfig) -> Result<WorkerOutcome> {
    config.hyper.validate()?;
    let shard = read_shard(&config.shard_path)?;
    let model = match &config.model {
        Some(m) => m.clone(),
        None => Model::softmax(shard.dataset.n_features(), shard.dataset.n_classes().max(2))?,
    };

    let mut client = ExchangerClient::connect(&config.exchanger_address)?;
    let remote = client.hello()?;
    if remote.param_dim as usize != model.param_dim()
        || remote.model_fingerprint != model.fingerprint()
    {
        return Err(invalid(format!(
            "exchanger serves {} parameters (fingerprint {:#x}) but worker model {model} has {} (fingerprint {:#x})",
            remote.param_dim,
            remote.model_fingerprint,
            model.param_dim(),
            model.fingerprint()
        )));
    }
    if remote.alpha != config.hyper.alpha as f32 {
        warn!(
            "worker {}: exchanger alpha {} differs from configured {}; the exchanger value applies",
            config.worker_id, remote.alpha, config.hyper.alpha
        );
    }
    let init = client.fetch_init()?;
    drop(client);

    let mut trainer = LocalTrainer::new(
        model,
        shard.dataset,
        config.hyper.clone(),
        init,
        config.rng_seed,
    )?;
    let started = Instant::now();
    let mut log = TrainLog::default();
    while !trainer.is_done() {
        let mut record = trainer.step()?;
        if record.exchanged {
            let updated = exchange_with_retry(&config.exchanger_address, trainer.params())?;
            trainer.set_params(updated)?;
        }
        record.wall_ms = started.elapsed().as_millis() as u64;
        log.records.push(record);
    }
    if let Some(cut) = trainer.loss_cut() {
        info!("worker {}: adaptive loss_cut {cut}", config.worker_id);
    }

    fs::create_dir_all(&config.metrics_path)?;
    log.write_csv(&config.metrics_file())?;
    write_params(trainer.params(), &config.params_file())?;
    info!(
        "worker {} finished {} iterations with {} exchanges",
        config.worker_id,
        log.len(),
        log.exchanges().count()
    );
    Ok(WorkerOutcome {
        log,
        final_params: trainer.params().clone(),
    })
}

/// One EXCHANGE round-trip on a fresh connection, retried with exponential
/// backoff.
pub fn exchange_with_retry(addr: &str, params: &ParamVector) -> Result<ParamVector> {
    let mut delay = BACKOFF_BASE;
    let mut attempt = 1;
    loop {
        let result = ExchangerClient::connect(addr).and_then(|mut c| c.exchange(params));
        match result {
            Ok(p) => return Ok(p),
            // the exchanger understood and refused the payload; retrying cannot help
            Err(e @ Error::Remote { code, .. }) if code != 4 => return Err(e),
            Err(e) if attempt >= EXCHANGE_ATTEMPTS => return Err(e),
            Err(e) => {
                warn!("exchange attempt {attempt} failed: {e}; retrying in {delay:?}");
                thread::sleep(delay);
                delay *= 2;
                attempt += 1;
            }
        }
    }
}

/// Materializes an in-memory partition as `shard_<index>.dshd` under `dir`.
/// A partially written file is removed on failure.
pub fn spill_shard(shard: &DataShard, dir: &Path, index: usize) -> Result<PathBuf> {
    if shard.dataset.is_empty() {
        return Err(invalid("cannot spill an empty partition"));
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("shard_{index}.dshd"));
    let partial = dir.join(format!("shard_{index}.dshd.partial"));
    let written =
        write_shard(shard, &partial).and_then(|_| fs::rename(&partial, &path).map_err(Error::from));
    if let Err(e) = written {
        let _ = fs::remove_file(&partial);
        return Err(e);
    }
    Ok(path)
}

/// `u32 dim` followed by `dim` little-endian f32 values.
pub fn write_params(params: &ParamVector, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(4 + 4 * params.dim());
    bytes.extend_from_slice(&(params.dim() as u32).to_le_bytes());
    for v in params.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<ParamVector> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 {
        return Err(Error::Format("parameter file too short".into()));
    }
    let dim = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if bytes.len() != 4 + 4 * dim {
        return Err(Error::Format(format!(
            "parameter file length does not match dim {dim}"
        )));
    }
    let values = bytes[4..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ParamVector::new(values)
}
