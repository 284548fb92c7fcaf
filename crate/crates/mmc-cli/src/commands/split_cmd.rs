//! `mmc split`: partition a triplet file into train/val/test pieces, either
//! by global fractions or by fixed per-row counts.

use crate::config::resolve_out;
use crate::SplitArgs;
use anyhow::{bail, Context, Result};
use mmc_core::data::{parse_triplets, split, write_triplets, SplitSpec, TripletFormat};
use mmc_core::engine::ObservationSet;

fn parse_per_row(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("--per-row takes k_train,k_val; got {text:?}");
    }
    Ok((
        parts[0].trim().parse().context("per-row k_train")?,
        parts[1].trim().parse().context("per-row k_val")?,
    ))
}

pub fn run(args: SplitArgs) -> Result<()> {
    let format = TripletFormat {
        one_indexed: args.one_indexed,
    };
    let obs = parse_triplets(&args.input, format)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let spec = SplitSpec {
        train_frac: args.train_frac,
        val_frac: args.val_frac,
        per_row: args.per_row.as_deref().map(parse_per_row).transpose()?,
        seed: args.seed,
    };
    let (train, val, test) = split(&obs, &spec)?;

    let out = resolve_out(&args.out);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let source = format!("split of {}", args.input.display());
    let zero = TripletFormat { one_indexed: false };
    let write = |name: &str, set: &ObservationSet| -> Result<()> {
        write_triplets(out.join(name), set, zero, &source)?;
        Ok(())
    };
    write("train.csv", &train)?;
    write("val.csv", &val)?;
    write("test.csv", &test)?;
    println!(
        "split {} observations into train={} val={} test={} under {}",
        obs.len(),
        train.len(),
        val.len(),
        test.len(),
        out.display(),
    );
    Ok(())
}
