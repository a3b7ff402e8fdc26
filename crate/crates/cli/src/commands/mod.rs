mod analyze;
mod data;
mod exchanger;
mod launch;
mod simulate;
mod stats;
mod worker;

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use elastic_core::data::{gen_synthetic, load_csv, read_shard, Dataset};
use elastic_core::Model;

use crate::args::{Command, DataSourceArgs};

/// An error in the command line that clap could not catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(e: impl fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Exchanger(a) => exchanger::run(a),
        Command::Worker(a) => worker::run(a),
        Command::Data(c) => data::run(c),
        Command::Simulate(a) => simulate::run(a),
        Command::Analyze(c) => analyze::run(c),
        Command::Stats(a) => stats::run(a),
        Command::LaunchLocal(a) => launch::run(a),
    }
}

/// Reads a `.dshd` shard or a `label,f1,...` CSV file.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let ds = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("dshd"))
    {
        read_shard(path).map(|s| s.dataset)
    } else {
        load_csv(path)
    };
    ds.with_context(|| format!("loading {}", path.display()))
}

pub fn source_dataset(src: &DataSourceArgs, seed: u64) -> Result<Dataset> {
    match &src.data {
        Some(path) => load_dataset(path),
        None => gen_synthetic(&src.synthetic.spec(seed)).map_err(usage),
    }
}

pub fn model_for(model: &Option<Model>, ds: &Dataset) -> Result<Model> {
    match model {
        Some(m) => Ok(m.clone()),
        None => Model::softmax(ds.n_features(), ds.n_classes().max(2)).map_err(usage),
    }
}
