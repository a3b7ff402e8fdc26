//! Deterministic virtual-time emulation of n workers and the exchanger.
//!
//! Asynchrony is modelled as a seeded total order of worker events: each
//! worker finishes an iteration every `batch_cost` time units (scaled by its
//! cost multiplier) and pays `comm_cost` for every exchange. Events at equal
//! virtual times are ordered by a seeded tie-breaker, so a given
//! configuration always produces the same interleaving.

mod summary;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use summary::{write_outputs, SimSummary, SUMMARY_HEADER};

use crate::data::{partition, train_test_split, Dataset};
use crate::error::{invalid, Error, Result};
use crate::optim::{easgd_update, sgd_step, CommPeriod, Hyperparams, Model, ParamVector};
use crate::worker::{BatchSampler, LocalTrainer, TrainLog, TrainRecord};

pub const DEFAULT_EVAL_EVERY: u64 = 50;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// All workers barrier every iteration; the master applies the averaged
    /// gradient.
    Synchronous,
    /// Workers run independently and exchange elastically with the master.
    AsyncEasgd,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_workers: usize,
    pub hyper: Hyperparams,
    pub model: Model,
    pub dataset: Dataset,
    pub schedule_seed: u64,
    /// Virtual time units per exchange.
    pub comm_cost: f64,
    /// Virtual time units per minibatch.
    pub batch_cost: f64,
    pub mode: SimMode,
    /// Per-worker slowdown factors; empty means 1.0 for everyone.
    pub cost_multipliers: Vec<f64>,
    /// Held-out accuracy is measured every this many per-worker iterations.
    pub eval_every: u64,
    pub test_fraction: f64,
}

impl SimConfig {
    pub fn new(
        n_workers: usize,
        hyper: Hyperparams,
        model: Model,
        dataset: Dataset,
        schedule_seed: u64,
    ) -> Self {
        Self {
            n_workers,
            hyper,
            model,
            dataset,
            schedule_seed,
            comm_cost: 0.0,
            batch_cost: 1.0,
            mode: SimMode::AsyncEasgd,
            cost_multipliers: Vec::new(),
            eval_every: DEFAULT_EVAL_EVERY,
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }

    /// Single-worker synchronous run on the same data, split, seeds and
    /// initialization: plain SGD, the reference for the discrepancy penalty.
    pub fn baseline(&self) -> SimConfig {
        SimConfig {
            n_workers: 1,
            mode: SimMode::Synchronous,
            cost_multipliers: self.cost_multipliers.first().copied().into_iter().collect(),
            ..self.clone()
        }
    }

    /// Seed of the shared initial parameter vector.
    pub fn init_seed(&self) -> u64 {
        derive_seed(self.schedule_seed, INIT_STREAM)
    }

    /// Minibatch sampler seed of worker `k`.
    pub fn worker_seed(&self, k: usize) -> u64 {
        derive_seed(self.schedule_seed, WORKER_STREAM_BASE + k as u64)
    }

    fn validate(&self) -> Result<()> {
        if self.n_workers == 0 {
            return Err(invalid("simulation needs at least one worker"));
        }
        self.hyper.validate()?;
        if !(self.comm_cost.is_finite() && self.comm_cost >= 0.0) {
            return Err(invalid("comm_cost must be nonnegative"));
        }
        if !(self.batch_cost.is_finite() && self.batch_cost > 0.0) {
            return Err(invalid("batch_cost must be positive"));
        }
        if !self.cost_multipliers.is_empty() && self.cost_multipliers.len() != self.n_workers {
            return Err(invalid("one cost multiplier per worker is required"));
        }
        if self
            .cost_multipliers
            .iter()
            .any(|m| !(m.is_finite() && *m > 0.0))
        {
            return Err(invalid("cost multipliers must be positive"));
        }
        if self.eval_every == 0 {
            return Err(invalid("eval_every must be positive"));
        }
        if self.dataset.n_features() != self.model.n_features()
            || self.dataset.n_classes() > self.model.n_classes()
        {
            return Err(invalid(format!(
                "dataset does not fit model {}",
                self.model
            )));
        }
        Ok(())
    }

    fn multiplier(&self, worker: usize) -> f64 {
        self.cost_multipliers.get(worker).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub virtual_time: f64,
    /// Per-worker iterations completed (cluster average) at this point.
    pub iteration: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub n_workers: usize,
    pub worker_logs: Vec<TrainLog>,
    /// Master parameters at every evaluation point.
    pub master_snapshots: Vec<(f64, ParamVector)>,
    pub final_master: ParamVector,
    pub final_workers: Vec<ParamVector>,
    pub virtual_clock_total: f64,
    pub iterations_per_worker: u64,
    pub exchange_count: u64,
    pub eval_curve: Vec<EvalPoint>,
    /// Resolved adaptive thresholds (one per worker), if any.
    pub loss_cuts: Vec<f64>,
}

impl SimResult {
    /// Bitwise equality, including NaN-free float fields compared by bits.
    pub fn bit_identical(&self, other: &SimResult) -> bool {
        let logs = self.worker_logs.len() == other.worker_logs.len()
            && self
                .worker_logs
                .iter()
                .zip(&other.worker_logs)
                .all(|(a, b)| {
                    a.same_trajectory(b)
                        && a.records
                            .iter()
                            .zip(&b.records)
                            .all(|(x, y)| x.wall_ms == y.wall_ms)
                });
        let snaps = self.master_snapshots.len() == other.master_snapshots.len()
            && self
                .master_snapshots
                .iter()
                .zip(&other.master_snapshots)
                .all(|((ta, pa), (tb, pb))| ta.to_bits() == tb.to_bits() && pa.bit_eq(pb));
        let curve = self.eval_curve.len() == other.eval_curve.len()
            && self.eval_curve.iter().zip(&other.eval_curve).all(|(a, b)| {
                a.virtual_time.to_bits() == b.virtual_time.to_bits()
                    && a.iteration == b.iteration
                    && a.accuracy.to_bits() == b.accuracy.to_bits()
            });
        logs && snaps
            && curve
            && self.final_master.bit_eq(&other.final_master)
            && self.final_workers.len() == other.final_workers.len()
            && self
                .final_workers
                .iter()
                .zip(&other.final_workers)
                .all(|(a, b)| a.bit_eq(b))
            && self.virtual_clock_total.to_bits() == other.virtual_clock_total.to_bits()
            && self.iterations_per_worker == other.iterations_per_worker
            && self.exchange_count == other.exchange_count
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from one.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SPLIT_STREAM: u64 = 1;
const PARTITION_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const SCHEDULE_STREAM: u64 = 4;
const WORKER_STREAM_BASE: u64 = 100;

/// Splits off the held-out set, partitions the rest across the workers and
/// runs the configured mode.
pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let (train, test) = train_test_split(
        &cfg.dataset,
        cfg.test_fraction,
        derive_seed(cfg.schedule_seed, SPLIT_STREAM),
    )?;
    if cfg.n_workers > train.len() {
        return Err(invalid(format!(
            "{} training samples cannot be partitioned across {} workers",
            train.len(),
            cfg.n_workers
        )));
    }
    let shards = partition(
        &train,
        cfg.n_workers,
        derive_seed(cfg.schedule_seed, PARTITION_STREAM),
    )?
    .into_iter()
    .map(|s| s.dataset)
    .collect();
    simulate_partitioned(cfg, shards, &test)
}

/// Runs on explicit per-worker shards and a held-out set. `cfg.dataset` and
/// `cfg.test_fraction` are ignored.
pub fn simulate_partitioned(
    cfg: &SimConfig,
    shards: Vec<Dataset>,
    test: &Dataset,
) -> Result<SimResult> {
    cfg.validate()?;
    if shards.len() != cfg.n_workers {
        return Err(invalid(format!(
            "{} shards for {} workers",
            shards.len(),
            cfg.n_workers
        )));
    }
    let init = cfg.model.init(cfg.init_seed());
    match cfg.mode {
        SimMode::AsyncEasgd => run_async(cfg, shards, test, init),
        SimMode::Synchronous => run_sync(cfg, shards, test, init),
    }
}

#[derive(Debug, PartialEq)]
struct Event {
    time: f64,
    tie: u64,
    worker: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.tie.cmp(&other.tie))
            .then(self.worker.cmp(&other.worker))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Evaluator<'a> {
    model: &'a Model,
    test: &'a Dataset,
    every: u64,
    next: u64,
    curve: Vec<EvalPoint>,
    snapshots: Vec<(f64, ParamVector)>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a Model, test: &'a Dataset, every: u64) -> Self {
        Self {
            model,
            test,
            every,
            next: 0,
            curve: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    /// Records every evaluation point reached by `iteration` per-worker
    /// iterations.
    fn observe(&mut self, time: f64, iteration: u64, master: &ParamVector) -> Result<()> {
        while self.next <= iteration {
            let accuracy = self
                .model
                .accuracy(master, self.test.features(), self.test.labels())?;
            self.curve.push(EvalPoint {
                virtual_time: time,
                iteration: self.next,
                accuracy,
            });
            self.snapshots.push((time, master.clone()));
            self.next += self.every;
        }
        Ok(())
    }
}

fn run_async(
    cfg: &SimConfig,
    shards: Vec<Dataset>,
    test: &Dataset,
    init: ParamVector,
) -> Result<SimResult> {
    let n = cfg.n_workers;
    let alpha = cfg.hyper.alpha as f32;
    let mut trainers = shards
        .into_iter()
        .enumerate()
        .map(|(k, shard)| {
            LocalTrainer::new(
                cfg.model.clone(),
                shard,
                cfg.hyper.clone(),
                init.clone(),
                cfg.worker_seed(k),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut master = init;
    let mut logs = vec![TrainLog::default(); n];
    let mut schedule = ChaCha8Rng::seed_from_u64(derive_seed(cfg.schedule_seed, SCHEDULE_STREAM));
    let mut queue = BinaryHeap::new();
    for k in 0..n {
        queue.push(Reverse(Event {
            time: cfg.batch_cost * cfg.multiplier(k),
            tie: schedule.gen(),
            worker: k,
        }));
    }
    let mut eval = Evaluator::new(&cfg.model, test, cfg.eval_every);
    eval.observe(0.0, 0, &master)?;
    let mut completed = 0u64;
    let mut exchanges = 0u64;
    let mut clock = 0.0f64;
    while let Some(Reverse(ev)) = queue.pop() {
        let trainer = &mut trainers[ev.worker];
        let mut record: TrainRecord = trainer.step()?;
        record.wall_ms = ev.time as u64;
        let mut next = ev.time + cfg.batch_cost * cfg.multiplier(ev.worker);
        if record.exchanged {
            let (worker, new_master) = easgd_update(trainer.params(), &master, alpha)?;
            trainer.set_params(worker)?;
            master = new_master;
            exchanges += 1;
            next += cfg.comm_cost;
        }
        logs[ev.worker].records.push(record);
        completed += 1;
        clock = clock.max(ev.time + if record.exchanged { cfg.comm_cost } else { 0.0 });
        eval.observe(ev.time, completed / n as u64, &master)?;
        if !trainer.is_done() {
            queue.push(Reverse(Event {
                time: next,
                tie: schedule.gen(),
                worker: ev.worker,
            }));
        }
    }
    let loss_cuts = trainers.iter().filter_map(|t| t.loss_cut()).collect();
    Ok(SimResult {
        n_workers: n,
        worker_logs: logs,
        master_snapshots: eval.snapshots,
        final_workers: trainers.iter().map(|t| t.params().clone()).collect(),
        final_master: master,
        virtual_clock_total: clock,
        iterations_per_worker: cfg.hyper.i_max,
        exchange_count: exchanges,
        eval_curve: eval.curve,
        loss_cuts,
    })
}

fn run_sync(
    cfg: &SimConfig,
    shards: Vec<Dataset>,
    test: &Dataset,
    init: ParamVector,
) -> Result<SimResult> {
    let n = cfg.n_workers;
    let mut samplers = shards
        .iter()
        .enumerate()
        .map(|(k, s)| BatchSampler::new(s.len(), cfg.hyper.batch_size, cfg.worker_seed(k)))
        .collect::<Result<Vec<_>>>()?;
    let round_cost = (0..n)
        .map(|k| cfg.batch_cost * cfg.multiplier(k))
        .fold(0.0, f64::max)
        + cfg.comm_cost;
    let mut master = init;
    let mut logs = vec![TrainLog::default(); n];
    let mut eval = Evaluator::new(&cfg.model, test, cfg.eval_every);
    eval.observe(0.0, 0, &master)?;
    let dim = master.dim();
    let mut clock = 0.0;
    for round in 1..=cfg.hyper.i_max {
        let mut sum = vec![0.0f64; dim];
        let mut losses = Vec::with_capacity(n);
        for (sampler, shard) in samplers.iter_mut().zip(&shards) {
            let batch = shard.minibatch(sampler.next_batch())?;
            let (loss, grad) = cfg.model.loss_and_grad(&master, &batch)?;
            for (s, &g) in sum.iter_mut().zip(grad.as_slice()) {
                *s += g as f64;
            }
            losses.push(loss);
        }
        let wd = cfg.hyper.weight_decay as f32;
        let avg: Vec<f32> = sum
            .iter()
            .zip(master.as_slice())
            .map(|(&s, &x)| {
                let g = (s / n as f64) as f32;
                if wd > 0.0 {
                    g + wd * x
                } else {
                    g
                }
            })
            .collect();
        master = sgd_step(&master, &ParamVector::new(avg)?, cfg.hyper.eta)?;
        clock += round_cost;
        for (log, loss) in logs.iter_mut().zip(losses) {
            log.records.push(TrainRecord {
                iter: round,
                wall_ms: clock as u64,
                batch_loss: loss,
                cumulated_loss: 0.0,
                exchanged: true,
                period_len: 1,
            });
        }
        eval.observe(clock, round, &master)?;
    }
    Ok(SimResult {
        n_workers: n,
        worker_logs: logs,
        master_snapshots: eval.snapshots,
        final_workers: vec![master.clone(); n],
        final_master: master,
        virtual_clock_total: clock,
        iterations_per_worker: cfg.hyper.i_max,
        exchange_count: cfg.hyper.i_max * n as u64,
        eval_curve: eval.curve,
        loss_cuts: Vec::new(),
    })
}

/// First evaluated per-worker iteration count at which held-out accuracy
/// reaches `a`.
pub fn iterations_to_accuracy(result: &SimResult, a: f64) -> Option<u64> {
    result
        .eval_curve
        .iter()
        .find(|p| p.accuracy >= a)
        .map(|p| p.iteration)
}

/// Total cluster iterations needed to reach `a`, relative to the
/// single-worker requirement `baseline_n`.
pub fn estimate_d(async_result: &SimResult, baseline_n: u64, a: f64) -> Result<f64> {
    if baseline_n == 0 {
        return Err(invalid("baseline iteration count must be positive"));
    }
    let n_async = iterations_to_accuracy(async_result, a).ok_or(Error::NotReached)?;
    Ok(async_result.n_workers as f64 * n_async as f64 / baseline_n as f64)
}

/// Runs the baseline and the configured simulation and estimates the
/// discrepancy penalty at accuracy `a`.
pub fn measure_d(cfg: &SimConfig, a: f64) -> Result<(SimResult, u64, f64)> {
    let baseline = simulate(&cfg.baseline())?;
    let baseline_n = iterations_to_accuracy(&baseline, a).ok_or(Error::NotReached)?;
    let result = simulate(cfg)?;
    let d = estimate_d(&result, baseline_n, a)?;
    Ok((result, baseline_n, d))
}

pub(crate) fn period_label(period: &CommPeriod) -> String {
    match period {
        CommPeriod::Fixed { tau } => tau.to_string(),
        CommPeriod::Adaptive { .. } => "adaptive".into(),
    }
}
