use anyhow::Result;
use elastic_core::data::{gen_synthetic, partition, write_csv, write_shard, DataShard};
use elastic_core::worker::spill_shard;
use serde_json::json;

use super::{load_dataset, usage};
use crate::args::{DataCommand, DataGenArgs, DataPartitionArgs, DataSpillArgs, FormatArg};
use crate::manifest::{resolve_out, RunManifest};

pub fn run(c: DataCommand) -> Result<()> {
    match c {
        DataCommand::Gen(a) => gen(a),
        DataCommand::Partition(a) => split(a),
        DataCommand::Spill(a) => spill(a),
    }
}

fn gen(a: DataGenArgs) -> Result<()> {
    let out = resolve_out(&a.out.out);
    let spec = a.synthetic.spec(a.seed);
    let path = out.join(match a.format {
        FormatArg::Csv => "dataset.csv",
        FormatArg::Dshd => "dataset.dshd",
    });
    RunManifest::new(
        "data gen",
        json!({ "synthetic": spec, "format": format!("{:?}", a.format).to_lowercase() }),
    )
    .seed("data", a.seed)
    .artifact(&path)
    .write(&out)?;
    let ds = gen_synthetic(&spec).map_err(usage)?;
    match a.format {
        FormatArg::Csv => write_csv(&ds, &path)?,
        FormatArg::Dshd => write_shard(
            &DataShard {
                dataset: ds,
                seed: a.seed,
            },
            &path,
        )?,
    }
    println!("wrote {} samples to {}", spec.n_samples, path.display());
    Ok(())
}

fn split(a: DataPartitionArgs) -> Result<()> {
    let out = resolve_out(&a.out.out);
    let mut manifest = RunManifest::new("data partition", json!({ "input": a.input, "n": a.n }))
        .seed("partition", a.seed);
    for i in 0..a.n {
        manifest = manifest.artifact(out.join(format!("shard_{i}.dshd")));
    }
    manifest.write(&out)?;
    let ds = load_dataset(&a.input)?;
    let shards = partition(&ds, a.n, a.seed).map_err(usage)?;
    for (i, shard) in shards.iter().enumerate() {
        let path = spill_shard(shard, &out, i)?;
        println!("{}: {} samples", path.display(), shard.dataset.len());
    }
    Ok(())
}

fn spill(a: DataSpillArgs) -> Result<()> {
    if a.index >= a.n {
        return Err(usage(format!(
            "--index {} is out of range for --n {}",
            a.index, a.n
        )));
    }
    let out = resolve_out(&a.out.out);
    RunManifest::new(
        "data spill",
        json!({ "input": a.input, "n": a.n, "index": a.index }),
    )
    .seed("partition", a.seed)
    .artifact(out.join(format!("shard_{}.dshd", a.index)))
    .write(&out)?;
    let ds = load_dataset(&a.input)?;
    let shards = partition(&ds, a.n, a.seed).map_err(usage)?;
    let path = spill_shard(&shards[a.index], &out, a.index)?;
    println!(
        "{}: {} samples",
        path.display(),
        shards[a.index].dataset.len()
    );
    Ok(())
}
