//! Asynchronous elastic-averaging SGD.
//!
//! The crate provides the pieces of a small parameter-exchange training
//! system: built-in models and update rules ([`optim`]), dataset handling and
//! the DSHD shard format ([`data`]), the wire protocol ([`protocol`]) spoken
//! between workers and the central [`exchanger`], the training loop run by
//! each [`worker`], a deterministic virtual-time [`simulator`] and the
//! closed-form speed-up model in [`analysis`].

pub mod analysis;
pub mod data;
pub mod error;
pub mod exchanger;
pub mod optim;
pub mod protocol;
pub mod simulator;
pub mod worker;

pub use analysis::{speedup, speedup_large_tau, sweep, times, SpeedupInputs, SweepField, SweepRow};
pub use data::{DataShard, Dataset, SyntheticSpec};
pub use error::{Error, Result};
pub use exchanger::{ExchangerConfig, ExchangerHandle, ExchangerStats, UpdateMode};
pub use optim::{
    easgd_update, grad_check, sgd_step, CommPeriod, Hyperparams, Minibatch, Model, ModelKind,
    ParamVector,
};
pub use simulator::{estimate_d, iterations_to_accuracy, simulate, SimConfig, SimMode, SimResult};
pub use worker::{LocalTrainer, TrainLog, TrainRecord, WorkerConfig};
