use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elastic_core::data::SyntheticSpec;
use elastic_core::exchanger::{UpdateMode, DEFAULT_POOL_SIZE};
use elastic_core::simulator::{SimMode, DEFAULT_EVAL_EVERY};
use elastic_core::{CommPeriod, Hyperparams, Model};

#[derive(Debug, Parser)]
#[command(
    name = "elastic",
    version,
    about = "Asynchronous elastic-averaging SGD: exchanger, workers, simulator and speed-up analysis",
    after_help = "Log verbosity is controlled by DEEPSPARK_LOG (error, info or debug; default info)."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the central parameter exchanger until interrupted.
    Exchanger(ExchangerArgs),
    /// Train on one shard, exchanging with a running exchanger.
    Worker(WorkerArgs),
    /// Generate, partition and spill datasets.
    #[command(subcommand)]
    Data(DataCommand),
    /// Run the deterministic virtual-time simulator.
    Simulate(SimulateArgs),
    /// Evaluate the closed-form speed-up model.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Query a running exchanger's counters.
    Stats(StatsArgs),
    /// Start one exchanger and n worker processes on localhost.
    LaunchLocal(LaunchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory [default: ./runs/<timestamp>].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Locked,
    LockFree,
}

impl From<ModeArg> for UpdateMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Locked => UpdateMode::Locked,
            ModeArg::LockFree => UpdateMode::LockFree,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExchangerArgs {
    /// Address to listen on; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: String,
    /// Number of request handler threads.
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub pool_size: usize,
    /// Elastic moving rate.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// How handlers share the master vector.
    #[arg(long, value_enum, default_value_t = ModeArg::Locked)]
    pub mode: ModeArg,
    /// softmax:<features>:<classes> or mlp:<features>:<hidden,...>:<classes>.
    #[arg(long)]
    pub model: Model,
    /// Seed of the initial master parameters.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Close connections idle for this many seconds.
    #[arg(long, default_value_t = 30)]
    pub idle_timeout_secs: u64,
    /// Stop after this many exchanges and save the master vector.
    #[arg(long)]
    pub stop_after: Option<u64>,
    /// Write the bound address to this file once listening.
    #[arg(long, value_name = "FILE")]
    pub addr_file: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PeriodArgs {
    /// Fixed communication period in iterations [default: 100].
    #[arg(long, conflicts_with = "adaptive")]
    pub tau: Option<u64>,
    /// Exchange whenever the cumulated loss exceeds a threshold.
    #[arg(long)]
    pub adaptive: bool,
    /// Adaptive threshold [default: 20 x first-batch loss].
    #[arg(long, requires = "adaptive")]
    pub loss_cut: Option<f64>,
}

impl PeriodArgs {
    pub fn period(&self) -> CommPeriod {
        if self.adaptive {
            CommPeriod::Adaptive {
                loss_cut: self.loss_cut,
            }
        } else {
            CommPeriod::Fixed {
                tau: self.tau.unwrap_or(100),
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub period: PeriodArgs,
    /// Learning rate.
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    /// Elastic moving rate.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Iterations per worker.
    #[arg(long, default_value_t = 1000)]
    pub iters: u64,
    /// Minibatch size.
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// L2 penalty added to every gradient.
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
}

impl TrainArgs {
    pub fn hyper(&self) -> Hyperparams {
        Hyperparams {
            eta: self.eta,
            alpha: self.alpha,
            period: self.period.period(),
            batch_size: self.batch,
            i_max: self.iters,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct WorkerArgs {
    /// Exchanger address.
    #[arg(long)]
    pub connect: String,
    /// DSHD shard to train on.
    #[arg(long)]
    pub shard: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Worker id, used in output file names.
    #[arg(long, default_value_t = 0)]
    pub id: u32,
    /// Minibatch shuffling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model; defaults to softmax regression over the shard's dimensions.
    #[arg(long)]
    pub model: Option<Model>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 20)]
    pub features: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Minimum pairwise distance between class centroids.
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    /// Standard deviation of samples around their centroid.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
}

impl SyntheticArgs {
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_samples: self.samples,
            n_features: self.features,
            n_classes: self.classes,
            class_separation: self.separation,
            noise_sigma: self.noise,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataSourceArgs {
    /// CSV (`label,f1,...`) or DSHD file; synthetic data is generated when
    /// omitted.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Dshd,
}

#[derive(Debug, Subcommand)]
pub enum DataCommand {
    /// Generate a synthetic Gaussian-blob dataset.
    Gen(DataGenArgs),
    /// Partition a dataset into n DSHD shards.
    Partition(DataPartitionArgs),
    /// Write one worker's partition as a local DSHD shard.
    Spill(DataSpillArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataGenArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Dshd)]
    pub format: FormatArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DataPartitionArgs {
    /// CSV or DSHD input.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Number of shards.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DataSpillArgs {
    /// CSV or DSHD input.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Number of partitions the input is split into.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Partition to spill.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModeArg {
    Async,
    Sync,
}

impl From<SimModeArg> for SimMode {
    fn from(m: SimModeArg) -> Self {
        match m {
            SimModeArg::Async => SimMode::AsyncEasgd,
            SimModeArg::Sync => SimMode::Synchronous,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Number of simulated workers.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Model; defaults to softmax regression over the data's dimensions.
    #[arg(long)]
    pub model: Option<Model>,
    #[command(flatten)]
    pub source: DataSourceArgs,
    /// Seed for data generation, split, partition, initialization and schedule.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Virtual time per exchange (S).
    #[arg(long, default_value_t = 0.0)]
    pub comm_cost: f64,
    /// Virtual time per minibatch (C).
    #[arg(long, default_value_t = 1.0)]
    pub batch_cost: f64,
    #[arg(long, value_enum, default_value_t = SimModeArg::Async)]
    pub mode: SimModeArg,
    /// Per-worker slowdown factors, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cost_multipliers: Vec<f64>,
    /// Evaluate held-out accuracy every this many per-worker iterations.
    #[arg(long, default_value_t = DEFAULT_EVAL_EVERY)]
    pub eval_every: u64,
    /// Also run the single-worker baseline and estimate d at this accuracy.
    #[arg(long)]
    pub target: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Computation time, communication time and speed-up for one input.
    Speedup(SpeedupArgs),
    /// Speed-up table over a range of one input.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelInputArgs {
    /// Single-worker iterations to the target accuracy.
    #[arg(long, default_value_t = 1000)]
    pub n_a: u64,
    /// Computation time per minibatch.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Communication overhead per exchange; overrides --s-over-c.
    #[arg(long)]
    pub s: Option<f64>,
    /// Communication overhead relative to C.
    #[arg(long, default_value_t = 10.0)]
    pub s_over_c: f64,
    /// Number of workers.
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    /// Communication period.
    #[arg(long, default_value_t = 1)]
    pub tau: u64,
    /// Discrepancy penalty.
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Target accuracy the inputs refer to (recorded only).
    #[arg(long)]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SpeedupArgs {
    #[command(flatten)]
    pub inputs: ModelInputArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub inputs: ModelInputArgs,
    /// Field to vary: n_a, c, s, n, tau or d.
    #[arg(long)]
    pub vary: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required_unless_present = "range")]
    pub values: Vec<f64>,
    /// start:end:step, inclusive of end.
    #[arg(long, conflicts_with = "values")]
    pub range: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Exchanger address.
    #[arg(long)]
    pub connect: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct LaunchArgs {
    /// Number of worker processes.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Model; defaults to softmax regression over the data's dimensions.
    #[arg(long)]
    pub model: Option<Model>,
    #[command(flatten)]
    pub source: DataSourceArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Locked)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub pool_size: usize,
    /// Seed for data generation, split, partition, initialization and workers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of samples held out for evaluation.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Kill the workers if they have not finished after this many seconds.
    #[arg(long, default_value_t = 600)]
    pub timeout_secs: u64,
    #[command(flatten)]
    pub out: OutArgs,
}
