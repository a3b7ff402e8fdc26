use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{period_label, SimConfig, SimResult};
use crate::error::Result;

pub const SUMMARY_HEADER: &str = "n,tau,alpha,S,C,N_a,d_estimate,seed";

/// One row of `sim_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub n: usize,
    /// Communication period, or `adaptive`.
    pub tau: String,
    pub alpha: f64,
    pub comm_cost: f64,
    pub batch_cost: f64,
    /// Baseline iterations to the target accuracy, if reached.
    pub n_a: Option<u64>,
    pub d_estimate: Option<f64>,
    pub seed: u64,
}

impl SimSummary {
    pub fn new(cfg: &SimConfig, n_a: Option<u64>, d_estimate: Option<f64>) -> Self {
        Self {
            n: cfg.n_workers,
            tau: period_label(&cfg.hyper.period),
            alpha: cfg.hyper.alpha,
            comm_cost: cfg.comm_cost,
            batch_cost: cfg.batch_cost,
            n_a,
            d_estimate,
            seed: cfg.schedule_seed,
        }
    }

    fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.tau,
            self.alpha,
            self.comm_cost,
            self.batch_cost,
            opt(self.n_a.map(|v| v.to_string())),
            opt(self.d_estimate.map(|v| v.to_string())),
            self.seed
        )
    }
}

/// Writes `worker_<k>.csv`, `eval_curve.csv` and `sim_summary.csv` into `dir`.
pub fn write_outputs(result: &SimResult, summary: &SimSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, log) in result.worker_logs.iter().enumerate() {
        log.write_csv(&dir.join(format!("worker_{k}.csv")))?;
    }
    let mut curve = BufWriter::new(File::create(dir.join("eval_curve.csv"))?);
    writeln!(curve, "virtual_time,iteration,accuracy")?;
    for p in &result.eval_curve {
        writeln!(curve, "{},{},{}", p.virtual_time, p.iteration, p.accuracy)?;
    }
    curve.flush()?;
    let mut s = BufWriter::new(File::create(dir.join("sim_summary.csv"))?);
    writeln!(s, "{SUMMARY_HEADER}")?;
    writeln!(s, "{}", summary.csv_row())?;
    s.flush()?;
    Ok(())
}
