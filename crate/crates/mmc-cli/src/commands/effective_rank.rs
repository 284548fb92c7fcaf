//! `mmc effective-rank`: push a dense matrix through a link at one or more
//! steepness values and report the effective rank of each result.
//!
//! Output CSV columns are `c,effective_rank,nondecreasing`, where the flag
//! is cumulative: true while every rank so far is >= the previous one.

use crate::config::resolve_out;
use crate::{EffectiveRankArgs, LinkKind};
use anyhow::{Context, Result};
use mmc_core::data::{logistic, parse_dense};
use mmc_core::linalg::effective_rank;
use std::fmt::Write as _;

pub fn run(args: EffectiveRankArgs) -> Result<()> {
    let base = parse_dense(&args.matrix)
        .with_context(|| format!("reading {}", args.matrix.display()))?;
    let mut csv = String::from("c,effective_rank,nondecreasing\n");
    let mut prev: Option<usize> = None;
    let mut nondecreasing = true;
    for &c in &args.c_values {
        let mapped = base.map(|t| match args.link {
            LinkKind::Logistic => logistic(c, t),
            LinkKind::Identity => t,
        })?;
        let rank = effective_rank(&mapped, args.eps)?;
        if prev.is_some_and(|p| rank < p) {
            nondecreasing = false;
        }
        prev = Some(rank);
        let _ = writeln!(csv, "{c},{rank},{nondecreasing}");
        println!("c={c}: effective rank {rank} at eps={}", args.eps);
    }
    let out = resolve_out(&args.out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}
