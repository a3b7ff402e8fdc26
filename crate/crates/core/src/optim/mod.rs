//! Parameter vectors, built-in models and the local/elastic update rules.

mod gradcheck;
mod model;
mod params;
mod update;

pub use gradcheck::grad_check;
pub use model::{Minibatch, Model, ModelKind};
pub use params::{CommPeriod, Hyperparams, ParamVector, DEFAULT_LOSS_CUT_FACTOR};
pub use update::{easgd_update, elastic_pair, sgd_step};

pub(crate) use params::validate_alpha;
