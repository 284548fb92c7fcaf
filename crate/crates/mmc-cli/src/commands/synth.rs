//! `mmc synth`: generate a synthetic problem and write its files.

use crate::config::resolve_out;
use crate::SynthArgs;
use anyhow::{Context, Result};
use mmc_core::data::{gen_synthetic, write_dense, write_triplets, SyntheticSpec, TripletFormat};

pub fn run(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n: args.n,
        m: args.m,
        r: args.r,
        c: args.c,
        p: args.p,
        noise_sd: args.noise_sd,
        bound_values: args.bound,
        seed: args.seed,
    };
    let data = gen_synthetic(&spec)?;
    let out = resolve_out(&args.out);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let source = format!(
        "synthetic n={} m={} r={} c={} p={} noise_sd={} seed={}",
        spec.n, spec.m, spec.r, spec.c, spec.p, spec.noise_sd, spec.seed
    );
    write_dense(out.join("z_star.csv"), &data.z_star)?;
    write_dense(out.join("m_star.csv"), &data.m_star)?;
    let format = TripletFormat::default();
    write_triplets(out.join("train.csv"), &data.train, format, &source)?;
    write_triplets(out.join("heldout.csv"), &data.heldout, format, &source)?;
    println!(
        "wrote {} ({} observed, {} heldout)",
        out.display(),
        data.train.len(),
        data.heldout.len()
    );
    Ok(())
}
