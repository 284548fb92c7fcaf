//! `mmc complete`: run a completion algorithm over one or more seeds and
//! write per-cell artifacts plus an aggregate summary.
//!
//! Each seed is an independent cell under `<out>/seed-<s>/` holding
//! `m_hat.csv`, `trace.csv` (columns `iteration,train_rmse,rank`), and
//! `metrics.json`; failures leave an `error.json` in the cell instead.
//! `summary.json` at the root aggregates mean and standard deviation across
//! the seeds that ran.

use crate::config::{load, resolve_out, ConfigFile};
use crate::metrics::{stat, ErrorRecord, MetricsRecord, Summary, TraceRow, SCHEMA_VERSION};
use crate::{Algorithm, CompleteArgs};
use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use mmc_core::data::{gen_synthetic, parse_triplets, write_dense, SyntheticSpec, TripletFormat};
use mmc_core::engine::{
    lrmc_baseline, mmc_calibrated, mmc_least_squares, mmc_one_step, rmse_on,
    select_rank_one_step, MmcConfig, MmcResult, ObservationSet, RankPolicy, RankSchedule,
};
use mmc_core::lpav::LpavSettings;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone)]
enum RankSpec {
    Fixed(usize),
    Schedule(RankSchedule),
    Candidates(Vec<usize>),
}

#[derive(Debug)]
enum Source {
    Files {
        train: ObservationSet,
        val: Option<ObservationSet>,
        test: Option<ObservationSet>,
    },
    Synth(SyntheticSpec),
}

struct Resolved {
    algorithm: Algorithm,
    source: Source,
    dataset: String,
    rank: RankSpec,
    lipschitz: f64,
    eta: Option<f64>,
    max_iters: usize,
    threshold: f64,
    lpav: LpavSettings,
    seeds: Vec<u64>,
    jobs: usize,
    out: PathBuf,
}

fn parse_schedule(text: &str) -> Result<RankSchedule> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        bail!("schedule must be r0,r_inc,r_max,progress_eps; got {text:?}");
    }
    Ok(RankSchedule {
        r0: parts[0].trim().parse().context("schedule r0")?,
        r_inc: parts[1].trim().parse().context("schedule r_inc")?,
        r_max: parts[2].trim().parse().context("schedule r_max")?,
        progress_eps: parts[3].trim().parse().context("schedule progress_eps")?,
    })
}

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::MmcC => "mmc-c",
        Algorithm::MmcLs => "mmc-ls",
        Algorithm::Mmc1 => "mmc-1",
        Algorithm::LrmcBaseline => "lrmc-baseline",
    }
}

fn resolve(args: CompleteArgs, cfg: ConfigFile) -> Result<Resolved> {
    let algorithm = match (args.algorithm, cfg.algorithm.as_deref()) {
        (Some(a), _) => a,
        (None, Some(name)) => Algorithm::from_str(name, false)
            .map_err(|_| anyhow!("unknown algorithm {name:?} in config"))?,
        (None, None) => bail!("--algorithm is required (flag or config)"),
    };

    let any_synth_flag = args.synth_n.is_some()
        || args.synth_m.is_some()
        || args.synth_r.is_some()
        || args.synth_c.is_some()
        || args.synth_p.is_some()
        || args.synth_noise_sd.is_some()
        || args.synth_bound;
    let synth_spec = if any_synth_flag {
        Some(SyntheticSpec {
            n: args.synth_n.context("--synth-n is required with synthetic data")?,
            m: args.synth_m.context("--synth-m is required with synthetic data")?,
            r: args.synth_r.context("--synth-r is required with synthetic data")?,
            c: args.synth_c.context("--synth-c is required with synthetic data")?,
            p: args.synth_p.context("--synth-p is required with synthetic data")?,
            noise_sd: args.synth_noise_sd.unwrap_or(0.0),
            bound_values: args.synth_bound,
            seed: 0,
        })
    } else {
        cfg.synth.map(|s| SyntheticSpec {
            n: s.n,
            m: s.m,
            r: s.r,
            c: s.c,
            p: s.p,
            noise_sd: s.noise_sd,
            bound_values: s.bound,
            seed: 0,
        })
    };
    let train_path = args.train.or(cfg.train);
    let (source, dataset) = match (train_path, synth_spec) {
        (Some(_), Some(_)) => bail!("choose one data source: files or synthetic"),
        (None, None) => bail!("a data source is required: --train or --synth-*"),
        (Some(train), None) => {
            let format = TripletFormat {
                one_indexed: args.one_indexed || cfg.one_indexed.unwrap_or(false),
            };
            let id = train.display().to_string();
            let parse = |p: PathBuf| {
                parse_triplets(&p, format).with_context(|| format!("reading {}", p.display()))
            };
            let train = parse(train)?;
            let val = args.val.or(cfg.val).map(parse).transpose()?;
            let test = args.test.or(cfg.test).map(parse).transpose()?;
            (Source::Files { train, val, test }, id)
        }
        (None, Some(spec)) => {
            let id = format!(
                "synthetic n={} m={} r={} c={} p={} noise_sd={}",
                spec.n, spec.m, spec.r, spec.c, spec.p, spec.noise_sd
            );
            (Source::Synth(spec), id)
        }
    };

    let rank_flag = args.rank.or(cfg.rank);
    let ranks = args.ranks.or(cfg.ranks);
    let schedule = args
        .schedule
        .or(cfg.schedule)
        .map(|s| parse_schedule(&s))
        .transpose()?;
    let rank = match (rank_flag, schedule, ranks) {
        (_, Some(_), Some(_)) | (Some(_), Some(_), None) => {
            bail!("--rank, --schedule, and --ranks are mutually exclusive")
        }
        (Some(_), None, Some(_)) => bail!("--rank and --ranks are mutually exclusive"),
        (None, Some(s), None) => {
            if algorithm == Algorithm::Mmc1 {
                bail!("mmc-1 takes --rank or --ranks, not a schedule");
            }
            RankSpec::Schedule(s)
        }
        (None, None, Some(list)) => {
            if algorithm != Algorithm::Mmc1 {
                bail!("--ranks selects the mmc-1 rank by validation; use --rank here");
            }
            if list.is_empty() {
                bail!("--ranks needs at least one candidate");
            }
            RankSpec::Candidates(list)
        }
        (Some(r), None, None) => RankSpec::Fixed(r),
        (None, None, None) => bail!("a rank is required: --rank, --ranks, or --schedule"),
    };

    let lipschitz = match args.lipschitz.or(cfg.lipschitz) {
        Some(l) => l,
        None if algorithm == Algorithm::LrmcBaseline => 1.0,
        None => bail!("--lipschitz is required for link-fitting algorithms"),
    };

    let defaults = LpavSettings::default();
    Ok(Resolved {
        algorithm,
        source,
        dataset,
        rank,
        lipschitz,
        eta: args.eta.or(cfg.eta),
        max_iters: args.max_iters.or(cfg.max_iters).unwrap_or(50),
        threshold: args.threshold.or(cfg.threshold).unwrap_or(1e-3),
        lpav: LpavSettings {
            gamma: args.gamma.or(cfg.gamma).unwrap_or(defaults.gamma),
            eps_abs: args.eps_abs.or(cfg.eps_abs).unwrap_or(defaults.eps_abs),
            eps_rel: args.eps_rel.or(cfg.eps_rel).unwrap_or(defaults.eps_rel),
            max_iters: args
                .admm_max_iters
                .or(cfg.admm_max_iters)
                .unwrap_or(defaults.max_iters),
        },
        seeds: args.seeds.or(cfg.seeds).unwrap_or_else(|| vec![0]),
        jobs: args.jobs.or(cfg.jobs).unwrap_or(1),
        out: resolve_out(&args.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("mmc-out"))),
    })
}

struct CellData {
    train: ObservationSet,
    val: Option<ObservationSet>,
    test: Option<ObservationSet>,
}

fn materialize(r: &Resolved, seed: u64) -> Result<CellData> {
    match &r.source {
        Source::Files { train, val, test } => Ok(CellData {
            train: train.clone(),
            val: val.clone(),
            test: test.clone(),
        }),
        Source::Synth(spec) => {
            let mut spec = spec.clone();
            spec.seed = seed;
            let data = gen_synthetic(&spec)?;
            let heldout = (!data.heldout.is_empty()).then_some(data.heldout);
            Ok(CellData {
                train: data.train,
                // The Bernoulli complement doubles as validation and test
                // for synthetic runs.
                val: heldout.clone(),
                test: heldout,
            })
        }
    }
}

fn run_solver(
    r: &Resolved,
    data: &CellData,
    seed: u64,
) -> mmc_core::Result<(MmcResult, Option<Vec<(usize, f64)>>)> {
    let policy = match &r.rank {
        RankSpec::Fixed(rank) => RankPolicy::Fixed(*rank),
        RankSpec::Schedule(s) => RankPolicy::Increasing(*s),
        RankSpec::Candidates(_) => RankPolicy::Fixed(1),
    };
    let cfg = MmcConfig {
        rank: policy,
        lipschitz: r.lipschitz,
        eta: r.eta,
        max_outer_iters: r.max_iters,
        train_threshold: r.threshold,
        lpav: r.lpav,
        seed,
    };
    match r.algorithm {
        Algorithm::MmcC => Ok((mmc_calibrated(&data.train, &cfg)?, None)),
        Algorithm::MmcLs => Ok((mmc_least_squares(&data.train, &cfg)?, None)),
        Algorithm::LrmcBaseline => Ok((lrmc_baseline(&data.train, &cfg)?, None)),
        Algorithm::Mmc1 => match &r.rank {
            RankSpec::Fixed(rank) => {
                Ok((mmc_one_step(&data.train, *rank, r.lipschitz, &r.lpav)?, None))
            }
            RankSpec::Candidates(ranks) => {
                let val = data.val.as_ref().ok_or_else(|| {
                    mmc_core::MmcError::InvalidInput(
                        "mmc-1 rank selection needs validation observations".into(),
                    )
                })?;
                let (_, scores, fit) =
                    select_rank_one_step(&data.train, val, ranks, r.lipschitz, &r.lpav)?;
                Ok((fit, Some(scores)))
            }
            RankSpec::Schedule(_) => unreachable!("rejected during resolution"),
        },
    }
}

fn run_cell(r: &Resolved, seed: u64) -> Result<MetricsRecord> {
    let dir = r.out.join(format!("seed-{seed}"));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let started = Instant::now();
    let outcome = materialize(r, seed).and_then(|data| {
        let (result, scores) = run_solver(r, &data, seed).map_err(anyhow::Error::from)?;
        Ok((data, result, scores))
    });
    let (data, result, rank_scores) = match outcome {
        Ok(parts) => parts,
        Err(err) => {
            let record = ErrorRecord {
                schema_version: SCHEMA_VERSION,
                error: format!("{err:#}"),
                seed: Some(seed),
            };
            crate::metrics::write_json(&dir.join("error.json"), &record)?;
            return Err(err.context(format!("seed {seed}")));
        }
    };

    write_dense(dir.join("m_hat.csv"), &result.m_hat)?;
    let mut trace_csv = String::from("iteration,train_rmse,rank\n");
    for row in &result.trace {
        let _ = writeln!(trace_csv, "{},{},{}", row.iteration, row.train_rmse, row.rank);
    }
    std::fs::write(dir.join("trace.csv"), trace_csv)?;

    let record = MetricsRecord {
        schema_version: SCHEMA_VERSION,
        algorithm: algorithm_name(r.algorithm).to_string(),
        dataset: r.dataset.clone(),
        seed,
        final_rank: result.trace.last().map_or(0, |t| t.rank),
        converged: result.converged,
        iterations: result.trace.len(),
        eta: result.eta,
        train_rmse: rmse_on(&data.train, &result.m_hat)?,
        val_rmse: optional_rmse(&data.val, &result)?,
        test_rmse: optional_rmse(&data.test, &result)?,
        rank_scores,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        trace: result.trace.iter().map(TraceRow::from).collect(),
    };
    crate::metrics::write_json(&dir.join("metrics.json"), &record)?;
    Ok(record)
}

fn optional_rmse(set: &Option<ObservationSet>, result: &MmcResult) -> Result<Option<f64>> {
    match set {
        Some(obs) if !obs.is_empty() => Ok(Some(rmse_on(obs, &result.m_hat)?)),
        _ => Ok(None),
    }
}

pub fn run(args: CompleteArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => load(path)?,
        None => ConfigFile::default(),
    };
    let r = resolve(args, cfg)?;
    std::fs::create_dir_all(&r.out).with_context(|| format!("creating {}", r.out.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(r.jobs)
        .build()
        .context("building worker pool")?;
    let cells: Vec<Result<MetricsRecord>> =
        pool.install(|| r.seeds.par_iter().map(|seed| run_cell(&r, *seed)).collect());

    let mut records = Vec::new();
    let mut first_err = None;
    for cell in cells {
        match cell {
            Ok(rec) => records.push(rec),
            Err(err) if first_err.is_none() => first_err = Some(err),
            Err(_) => {}
        }
    }
    if let Some(err) = first_err {
        let record = ErrorRecord {
            schema_version: SCHEMA_VERSION,
            error: format!("{err:#}"),
            seed: None,
        };
        crate::metrics::write_json(&r.out.join("error.json"), &record)?;
        return Err(err);
    }

    let train: Vec<f64> = records.iter().map(|c| c.train_rmse).collect();
    let vals: Vec<f64> = records.iter().filter_map(|c| c.val_rmse).collect();
    let tests: Vec<f64> = records.iter().filter_map(|c| c.test_rmse).collect();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        algorithm: algorithm_name(r.algorithm).to_string(),
        dataset: r.dataset.clone(),
        seeds: r.seeds.clone(),
        train_rmse: stat(&train),
        val_rmse: (vals.len() == records.len()).then(|| stat(&vals)),
        test_rmse: (tests.len() == records.len()).then(|| stat(&tests)),
        converged_cells: records.iter().filter(|c| c.converged).count(),
    };
    crate::metrics::write_json(&r.out.join("summary.json"), &summary)?;
    for rec in &records {
        println!(
            "seed {}: train_rmse={:.6} test_rmse={} rank={} iterations={}",
            rec.seed,
            rec.train_rmse,
            rec.test_rmse
                .map_or_else(|| "n/a".into(), |v| format!("{v:.6}")),
            rec.final_rank,
            rec.iterations,
        );
    }
    Ok(())
}
