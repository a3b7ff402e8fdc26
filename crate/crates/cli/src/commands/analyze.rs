use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::Result;
use elastic_core::analysis::{six_sig, write_sweep_csv, SweepRow};
use elastic_core::{speedup_large_tau, sweep as run_sweep, times, SpeedupInputs, SweepField};
use serde_json::json;

use super::usage;
use crate::args::{AnalyzeCommand, ModelInputArgs, SpeedupArgs, SweepArgs};
use crate::manifest::{resolve_out, RunManifest};

pub fn run(c: AnalyzeCommand) -> Result<()> {
    match c {
        AnalyzeCommand::Speedup(a) => speedup(a),
        AnalyzeCommand::Sweep(a) => sweep(a),
    }
}

fn inputs(a: &ModelInputArgs) -> Result<SpeedupInputs> {
    let inp = SpeedupInputs {
        n_a: a.n_a,
        c: a.c,
        s: a.s.unwrap_or(a.s_over_c * a.c),
        n: a.n,
        tau: a.tau,
        d: a.d,
        a: a.a,
    };
    inp.validate().map_err(usage)?;
    Ok(inp)
}

fn speedup(a: SpeedupArgs) -> Result<()> {
    let inp = inputs(&a.inputs)?;
    let out = resolve_out(&a.out.out);
    let csv = out.join("speedup.csv");
    RunManifest::new("analyze speedup", json!({ "inputs": inp }))
        .artifact(&csv)
        .write(&out)?;
    let (t_comp, t_comm) = times(&inp)?;
    let s = elastic_core::speedup(&inp)?;
    let limit = speedup_large_tau(inp.n, inp.d)?;
    let rows = [
        ("N_a", inp.n_a as f64),
        ("C", inp.c),
        ("S", inp.s),
        ("n", inp.n as f64),
        ("tau", inp.tau as f64),
        ("d", inp.d),
        ("T_comp", t_comp),
        ("T_comm", t_comm),
        ("speedup", s),
        ("speedup_large_tau", limit),
    ];
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for (name, v) in rows {
        writeln!(w, "{name:<18} {}", six_sig(v))?;
    }
    let mut f = BufWriter::new(File::create(&csv)?);
    writeln!(f, "n_a,c,s,n,tau,d,t_comp,t_comm,speedup,speedup_large_tau")?;
    writeln!(
        f,
        "{}",
        rows.iter()
            .map(|(_, v)| six_sig(*v))
            .collect::<Vec<_>>()
            .join(",")
    )?;
    f.flush()?;
    Ok(())
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("--range expects start:end:step, got '{spec}'")))?;
    let [start, end, step] = parts[..] else {
        return Err(usage(format!(
            "--range expects start:end:step, got '{spec}'"
        )));
    };
    if !(step > 0.0) || end < start {
        return Err(usage("--range needs a positive step and end >= start"));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let base = inputs(&a.inputs)?;
    let vary: SweepField = a.vary.parse().map_err(usage)?;
    let values = match &a.range {
        Some(r) => parse_range(r)?,
        None => a.values.clone(),
    };
    let out = resolve_out(&a.out.out);
    let csv = out.join("sweep.csv");
    RunManifest::new(
        "analyze sweep",
        json!({ "base": base, "vary": vary.name(), "values": values }),
    )
    .artifact(&csv)
    .write(&out)?;
    let rows: Vec<SweepRow> = run_sweep(&base, vary, &values).map_err(usage)?;
    write_sweep_csv(io::stdout().lock(), vary, &rows)?;
    write_sweep_csv(BufWriter::new(File::create(&csv)?), vary, &rows)?;
    Ok(())
}
