use anyhow::Result;
use elastic_core::simulator::{
    iterations_to_accuracy, measure_d, simulate, write_outputs, SimConfig, SimSummary,
};
use elastic_core::Error;
use serde_json::json;

use super::{model_for, source_dataset, usage};
use crate::args::SimulateArgs;
use crate::manifest::{resolve_out, RunManifest};

pub fn run(a: SimulateArgs) -> Result<()> {
    let out = resolve_out(&a.out.out);
    let hyper = a.train.hyper();
    hyper.validate().map_err(usage)?;
    if let Some(t) = a.target {
        if !(t > 0.0 && t < 1.0) {
            return Err(usage(format!("--target must lie in (0, 1), got {t}")));
        }
    }
    let dataset = source_dataset(&a.source, a.seed)?;
    let model = model_for(&a.model, &dataset)?;
    let mut cfg = SimConfig::new(a.workers, hyper, model.clone(), dataset, a.seed);
    cfg.comm_cost = a.comm_cost;
    cfg.batch_cost = a.batch_cost;
    cfg.mode = a.mode.into();
    cfg.cost_multipliers = a.cost_multipliers.clone();
    cfg.eval_every = a.eval_every;

    let mut manifest = RunManifest::new(
        "simulate",
        json!({
            "n_workers": cfg.n_workers,
            "hyper": cfg.hyper,
            "model": model.to_string(),
            "data": a.source.data,
            "synthetic": a.source.data.is_none().then(|| a.source.synthetic.spec(a.seed)),
            "comm_cost": cfg.comm_cost,
            "batch_cost": cfg.batch_cost,
            "mode": cfg.mode,
            "cost_multipliers": cfg.cost_multipliers,
            "eval_every": cfg.eval_every,
            "test_fraction": cfg.test_fraction,
            "target": a.target,
        }),
    )
    .seed("schedule", a.seed)
    .artifact(out.join("sim_summary.csv"))
    .artifact(out.join("eval_curve.csv"));
    for k in 0..cfg.n_workers {
        manifest = manifest.artifact(out.join(format!("worker_{k}.csv")));
    }
    manifest.write(&out)?;

    let (result, n_a, d) = match a.target {
        Some(t) => match measure_d(&cfg, t) {
            Ok((r, n_a, d)) => (r, Some(n_a), Some(d)),
            Err(Error::NotReached) => {
                log::warn!("target accuracy {t} not reached by the baseline or the simulated run");
                let r = simulate(&cfg)?;
                (r, None, None)
            }
            Err(e) => return Err(e.into()),
        },
        None => (simulate(&cfg)?, None, None),
    };
    write_outputs(&result, &SimSummary::new(&cfg, n_a, d), &out)?;
    let final_acc = result
        .eval_curve
        .last()
        .map(|p| p.accuracy)
        .unwrap_or(f64::NAN);
    println!(
        "simulated {} workers x {} iterations: {} exchanges, virtual time {}, final held-out accuracy {:.4}",
        cfg.n_workers, cfg.hyper.i_max, result.exchange_count, result.virtual_clock_total, final_acc
    );
    if let Some(t) = a.target {
        match (iterations_to_accuracy(&result, t), n_a, d) {
            (Some(n), Some(base), Some(d)) => {
                println!("reached {t} after {n} iterations per worker; baseline N_a={base}; d={d}")
            }
            _ => println!("target {t} not reached"),
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}
