//! Completion solvers.
//!
//! All variants share one loop: a gradient step on the observed cells, a
//! rank projection of the whole iterate, and (except for the identity-link
//! baseline) a refit of the monotone link by LPAV on the pairs
//! `(z_hat at observed cells, observed values)`. They differ only in the
//! gradient:
//!
//! - calibrated: `g(z) - x`, the gradient of `sum Phi(z) - x z` with
//!   `Phi' = g`; its curvature is bounded by the link's Lipschitz constant,
//!   so flat link regions do not stall progress
//! - least squares: `(g(z) - x) * g'(z)`, the gradient of the squared loss,
//!   which does stall where the link is flat
//! - identity: `z - x`, plain low-rank completion used as a baseline
//!
//! Observations form a multiset: the same cell may appear several times
//! (sampling with replacement) and each occurrence contributes its own
//! gradient and loss term.

use crate::error::{MmcError, Result};
use crate::linalg::project_rank_auto;
use crate::lpav::{fit_monotone_fn, LpavProblem, LpavSettings, LpavSolver, MonotoneFn};
use crate::matrix::DenseMatrix;
use ndarray::Array2;

/// Hard blow-up guard on the training error.
const DIVERGE_LIMIT: f64 = 1e6;
/// Oscillation guard: after this many iterations, bouncing more than
/// [`STALL_FACTOR`] above the best training error so far counts as
/// divergence and triggers a step-size halving. Errors within
/// [`STALL_NOISE_REL`] of zero relative to the data scale are exempt;
/// fluctuation at machine precision is not a stall.
const STALL_CHECK_FROM: usize = 5;
const STALL_FACTOR: f64 = 1.2;
const STALL_NOISE_REL: f64 = 1e-12;
const MAX_HALVINGS: usize = 10;

/// Multiset of observed entries of an `n x m` matrix.
///
/// Entries are `(row, col, value)` with in-bounds indices and finite values.
/// Construction permits an empty set (complements of full observations are
/// legitimately empty); every solver entry point requires nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    n: usize,
    m: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl ObservationSet {
    pub fn new(n: usize, m: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(MmcError::invalid("observation shape must be at least 1x1"));
        }
        for (k, (i, j, v)) in entries.iter().enumerate() {
            if *i >= n || *j >= m {
                return Err(MmcError::invalid(format!(
                    "entry {k} at ({i}, {j}) is outside {n}x{m}"
                )));
            }
            if !v.is_finite() {
                return Err(MmcError::invalid(format!(
                    "entry {k} at ({i}, {j}) has non-finite value {v}"
                )));
            }
        }
        Ok(ObservationSet { n, m, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    fn require_nonempty(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            return Err(MmcError::invalid(format!("{what} needs at least one observation")));
        }
        Ok(())
    }
}

/// Rank handling across outer iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankPolicy {
    Fixed(usize),
    Increasing(RankSchedule),
}

/// Start at `r0`; add `r_inc` (capping at `r_max`) whenever an iteration
/// improves the observed residual norm by a factor of `progress_eps` or
/// less: `1 - resid_t / resid_{t-1} <= progress_eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSchedule {
    pub r0: usize,
    pub r_inc: usize,
    pub r_max: usize,
    pub progress_eps: f64,
}

/// Solver configuration.
///
/// `eta = None` picks the default step size: `n m / |observations|` for the
/// link-fitting modes (a unit step against the initial link slope), `1` for
/// the identity baseline. Default steps are halved and the run restarted on
/// divergence, up to 10 times; an explicitly set `eta` is never adjusted.
/// `seed` is provenance only: the solvers are deterministic.
#[derive(Debug, Clone)]
pub struct MmcConfig {
    pub rank: RankPolicy,
    pub lipschitz: f64,
    pub eta: Option<f64>,
    pub max_outer_iters: usize,
    pub train_threshold: f64,
    pub lpav: LpavSettings,
    pub seed: u64,
}

impl MmcConfig {
    /// Fixed-rank configuration with the documented defaults: 50 outer
    /// iterations, relative-residual stop at 1e-3, default LPAV settings.
    pub fn fixed_rank(rank: usize, lipschitz: f64) -> Self {
        MmcConfig {
            rank: RankPolicy::Fixed(rank),
            lipschitz,
            eta: None,
            max_outer_iters: 50,
            train_threshold: 1e-3,
            lpav: LpavSettings::default(),
            seed: 0,
        }
    }
}

/// Per-iteration diagnostics of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub rank: usize,
    pub train_rmse: f64,
    pub train_rel_residual: f64,
    pub lpav_iterations: usize,
}

/// Solver output. `m_hat` is exactly `g_hat` evaluated entrywise on
/// `z_hat`, over every cell, observed or not.
#[derive(Debug, Clone)]
pub struct MmcResult {
    pub z_hat: DenseMatrix,
    pub g_hat: MonotoneFn,
    pub m_hat: DenseMatrix,
    pub trace: Vec<IterationRecord>,
    /// Whether the relative-residual stop fired before the iteration cap.
    pub converged: bool,
    /// Step size actually used (after any divergence halvings).
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GradientMode {
    Calibrated,
    LeastSquares,
    Identity,
}

/// Scaled sum-of-masks initializer: every observed occurrence adds its
/// value into its cell, then the whole matrix is scaled by
/// `n m / |observations|`. Unobserved cells are zero.
pub fn init_z(obs: &ObservationSet) -> Result<DenseMatrix> {
    obs.require_nonempty("init_z")?;
    let scale = (obs.n * obs.m) as f64 / obs.len() as f64;
    let mut acc = Array2::<f64>::zeros((obs.n, obs.m));
    for (i, j, v) in obs.entries() {
        acc[(*i, *j)] += *v;
    }
    acc.map_inplace(|v| *v *= scale);
    DenseMatrix::from_array(acc)
}

/// Initial link estimate: the linear map of slope `|observations| / (n m)`
/// through the origin, materialized as a two-knot function wide enough to
/// cover the initial iterate (and at least `[-2, 2]`).
pub fn init_g(obs: &ObservationSet) -> Result<MonotoneFn> {
    obs.require_nonempty("init_g")?;
    let slope = obs.len() as f64 / (obs.n * obs.m) as f64;
    let z0 = init_z(obs)?;
    let max_abs = z0
        .array()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let r = (2.0 * max_abs).max(2.0);
    fit_monotone_fn(&[-r, r], &[-slope * r, slope * r], slope)
}

/// Mean squared difference over all cells of two equal-shaped matrices.
pub fn mse(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(MmcError::invalid(format!(
            "mse shapes differ: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let total: f64 = a
        .array()
        .iter()
        .zip(b.array().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(total / (a.rows() * a.cols()) as f64)
}

/// Root mean squared error of `m` against the observed values, averaged
/// over the multiset of occurrences.
pub fn rmse_on(obs: &ObservationSet, m: &DenseMatrix) -> Result<f64> {
    obs.require_nonempty("rmse_on")?;
    if obs.n() != m.rows() || obs.m() != m.cols() {
        return Err(MmcError::invalid(format!(
            "rmse_on shapes differ: observations {}x{} vs matrix {}x{}",
            obs.n(),
            obs.m(),
            m.rows(),
            m.cols()
        )));
    }
    let total: f64 = obs
        .entries()
        .iter()
        .map(|(i, j, v)| {
            let d = m.get(*i, *j) - v;
            d * d
        })
        .sum();
    Ok((total / obs.len() as f64).sqrt())
}

fn validate_config(obs: &ObservationSet, cfg: &MmcConfig) -> Result<()> {
    let kmax = obs.n().min(obs.m());
    match cfg.rank {
        RankPolicy::Fixed(r) => {
            if r == 0 || r > kmax {
                return Err(MmcError::invalid(format!(
                    "rank {r} out of range 1..={kmax}"
                )));
            }
        }
        RankPolicy::Increasing(s) => {
            if s.r0 == 0 || s.r0 > kmax || s.r_max < s.r0 || s.r_max > kmax || s.r_inc == 0 {
                return Err(MmcError::invalid(format!(
                    "rank schedule {s:?} invalid for min dimension {kmax}"
                )));
            }
            if !(s.progress_eps >= 0.0 && s.progress_eps.is_finite()) {
                return Err(MmcError::invalid("progress_eps must be finite and >= 0"));
            }
        }
    }
    if !(cfg.lipschitz >= 0.0 && cfg.lipschitz.is_finite()) {
        return Err(MmcError::invalid("lipschitz bound must be finite and >= 0"));
    }
    if let Some(eta) = cfg.eta {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(MmcError::invalid("eta must be positive and finite"));
        }
    }
    if cfg.max_outer_iters == 0 {
        return Err(MmcError::invalid("max_outer_iters must be >= 1"));
    }
    if !(cfg.train_threshold >= 0.0) {
        return Err(MmcError::invalid("train_threshold must be >= 0"));
    }
    Ok(())
}

fn check_obs_shape(obs: &ObservationSet, z: &DenseMatrix) -> Result<()> {
    if obs.n() != z.rows() || obs.m() != z.cols() {
        return Err(MmcError::invalid(format!(
            "observations {}x{} do not match iterate {}x{}",
            obs.n(),
            obs.m(),
            z.rows(),
            z.cols()
        )));
    }
    Ok(())
}

/// Gradient of the calibrated loss `sum over occurrences of
/// Phi(z_ij) - x z_ij` with `Phi' = g`: each occurrence adds `g(z_ij) - x`
/// into its cell; unobserved cells are zero.
pub fn calibrated_gradient(
    obs: &ObservationSet,
    z: &DenseMatrix,
    g: &MonotoneFn,
) -> Result<DenseMatrix> {
    check_obs_shape(obs, z)?;
    let mut grad = Array2::<f64>::zeros((obs.n(), obs.m()));
    for (i, j, x) in obs.entries() {
        grad[(*i, *j)] += g.eval(z.get(*i, *j)) - x;
    }
    DenseMatrix::from_array(grad)
}

/// Gradient of the squared loss `1/2 sum over occurrences of
/// (g(z_ij) - x)^2`: each occurrence adds `(g(z_ij) - x) g'(z_ij)`.
pub fn least_squares_gradient(
    obs: &ObservationSet,
    z: &DenseMatrix,
    g: &MonotoneFn,
) -> Result<DenseMatrix> {
    check_obs_shape(obs, z)?;
    let mut grad = Array2::<f64>::zeros((obs.n(), obs.m()));
    for (i, j, x) in obs.entries() {
        let zij = z.get(*i, *j);
        grad[(*i, *j)] += (g.eval(zij) - x) * g.subgradient(zij);
    }
    DenseMatrix::from_array(grad)
}

/// Gradient of `1/2 sum over occurrences of (z_ij - x)^2`, the identity-link
/// baseline loss.
pub fn identity_gradient(obs: &ObservationSet, z: &DenseMatrix) -> Result<DenseMatrix> {
    check_obs_shape(obs, z)?;
    let mut grad = Array2::<f64>::zeros((obs.n(), obs.m()));
    for (i, j, x) in obs.entries() {
        grad[(*i, *j)] += z.get(*i, *j) - x;
    }
    DenseMatrix::from_array(grad)
}

/// Observed `(z, x)` pairs sorted by covariate, plus the norm of the
/// observed values (the denominator of the relative residual).
fn sorted_pairs(obs: &ObservationSet, z: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = obs
        .entries()
        .iter()
        .map(|(i, j, v)| (z.get(*i, *j), *v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs.into_iter().unzip()
}

struct RunOutcome {
    result: Option<MmcResult>,
    diverged: Option<MmcError>,
}

fn run_once(
    obs: &ObservationSet,
    cfg: &MmcConfig,
    mode: GradientMode,
    eta: f64,
) -> Result<RunOutcome> {
    let mut z = init_z(obs)?;
    let mut g = if mode == GradientMode::Identity {
        None
    } else {
        Some(init_g(obs)?)
    };
    let mut rank = match cfg.rank {
        RankPolicy::Fixed(r) => r,
        RankPolicy::Increasing(s) => s.r0,
    };
    let x_norm: f64 = obs
        .entries()
        .iter()
        .map(|(_, _, v)| v * v)
        .sum::<f64>()
        .sqrt();

    let mut solver = LpavSolver::new(cfg.lpav);
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut best_rmse = f64::INFINITY;
    let mut prev_resid: Option<f64> = None;

    for t in 1..=cfg.max_outer_iters {
        // Gradient step over the observed multiset.
        let grad = match (mode, &g) {
            (GradientMode::Identity, _) => identity_gradient(obs, &z)?,
            (GradientMode::Calibrated, Some(g)) => calibrated_gradient(obs, &z, g)?,
            (GradientMode::LeastSquares, Some(g)) => least_squares_gradient(obs, &z, g)?,
            _ => unreachable!("link modes always carry a link"),
        };
        {
            let za = z.array_mut();
            za.zip_mut_with(grad.array(), |zv, gv| *zv -= eta * gv);
            if za.iter().any(|v| !v.is_finite()) {
                return Ok(RunOutcome {
                    result: None,
                    diverged: Some(MmcError::Divergence {
                        iteration: t,
                        train_rmse: f64::INFINITY,
                        limit: DIVERGE_LIMIT,
                    }),
                });
            }
        }

        // Rank projection of the full iterate.
        z = project_rank_auto(&z, rank)?;

        // Link refit on the observed pairs.
        let mut lpav_iterations = 0;
        if mode != GradientMode::Identity {
            let (zs, xs) = sorted_pairs(obs, &z);
            let problem = LpavProblem {
                z: zs,
                x: xs,
                lipschitz: cfg.lipschitz,
            };
            let sol = solver
                .solve(&problem)
                .map_err(|e| MmcError::LinkFitAtIteration {
                    iteration: t,
                    source: Box::new(e),
                })?;
            lpav_iterations = sol.iterations;
            g = Some(fit_monotone_fn(&problem.z, &sol.y, cfg.lipschitz)?);
        }

        // Training diagnostics on the multiset.
        let mut err_sq = 0.0;
        for (i, j, x) in obs.entries() {
            let zij = z.get(*i, *j);
            let pred = match &g {
                Some(g) => g.eval(zij),
                None => zij,
            };
            err_sq += (pred - x) * (pred - x);
        }
        let err_norm = err_sq.sqrt();
        let train_rmse = (err_sq / obs.len() as f64).sqrt();
        let rel = if x_norm > 0.0 {
            err_norm / x_norm
        } else if err_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        trace.push(IterationRecord {
            iteration: t,
            rank,
            train_rmse,
            train_rel_residual: rel,
            lpav_iterations,
        });

        if train_rmse > DIVERGE_LIMIT {
            return Ok(RunOutcome {
                result: None,
                diverged: Some(MmcError::Divergence {
                    iteration: t,
                    train_rmse,
                    limit: DIVERGE_LIMIT,
                }),
            });
        }
        let noise_floor = STALL_NOISE_REL * x_norm / (obs.len() as f64).sqrt();
        if t >= STALL_CHECK_FROM && train_rmse > STALL_FACTOR * best_rmse && train_rmse > noise_floor
        {
            return Ok(RunOutcome {
                result: None,
                diverged: Some(MmcError::Divergence {
                    iteration: t,
                    train_rmse,
                    limit: STALL_FACTOR * best_rmse,
                }),
            });
        }
        best_rmse = best_rmse.min(train_rmse);

        if rel < cfg.train_threshold {
            converged = true;
            break;
        }

        // Rank schedule: bump when the residual norm stopped improving.
        if let RankPolicy::Increasing(s) = cfg.rank {
            if let Some(prev) = prev_resid {
                if prev > 0.0 && 1.0 - err_norm / prev <= s.progress_eps {
                    rank = (rank + s.r_inc).min(s.r_max);
                }
            }
            prev_resid = Some(err_norm);
        }
    }

    let g_hat = match g {
        Some(g) => g,
        None => identity_link(&z)?,
    };
    let m_hat = z.map(|v| g_hat.eval(v))?;
    Ok(RunOutcome {
        result: Some(MmcResult {
            z_hat: z,
            g_hat,
            m_hat,
            trace,
            converged,
            eta,
        }),
        diverged: None,
    })
}

/// Identity link spanning the iterate's value range (single knot when the
/// range collapses); used to report the baseline's output in link form.
fn identity_link(z: &DenseMatrix) -> Result<MonotoneFn> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in z.array().iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if lo == hi {
        fit_monotone_fn(&[lo], &[lo], 1.0)
    } else {
        fit_monotone_fn(&[lo, hi], &[lo, hi], 1.0)
    }
}

fn run(obs: &ObservationSet, cfg: &MmcConfig, mode: GradientMode) -> Result<MmcResult> {
    obs.require_nonempty("completion")?;
    validate_config(obs, cfg)?;
    let default_eta = match mode {
        GradientMode::Identity => 1.0,
        _ => (obs.n() * obs.m()) as f64 / obs.len() as f64,
    };
    let adjustable = cfg.eta.is_none();
    let mut eta = cfg.eta.unwrap_or(default_eta);
    let mut attempts = 0;
    loop {
        let outcome = run_once(obs, cfg, mode, eta)?;
        match (outcome.result, outcome.diverged) {
            (Some(r), _) => return Ok(r),
            (None, Some(err)) => {
                if adjustable && attempts < MAX_HALVINGS {
                    attempts += 1;
                    eta *= 0.5;
                } else {
                    return Err(err);
                }
            }
            (None, None) => unreachable!("run_once yields a result or a divergence"),
        }
    }
}

/// Calibrated-loss completion: gradient `g(z) - x` on observed cells, rank
/// projection, link refit, until the relative training residual drops below
/// `cfg.train_threshold` or `cfg.max_outer_iters` is reached.
pub fn mmc_calibrated(obs: &ObservationSet, cfg: &MmcConfig) -> Result<MmcResult> {
    run(obs, cfg, GradientMode::Calibrated)
}

/// Squared-loss variant: gradient `(g(z) - x) g'(z)`. Stalls where the
/// estimated link is flat; kept for comparison runs.
pub fn mmc_least_squares(obs: &ObservationSet, cfg: &MmcConfig) -> Result<MmcResult> {
    run(obs, cfg, GradientMode::LeastSquares)
}

/// Plain low-rank completion (identity link) under the same loop and
/// stopping rules; the reference baseline.
pub fn lrmc_baseline(obs: &ObservationSet, cfg: &MmcConfig) -> Result<MmcResult> {
    run(obs, cfg, GradientMode::Identity)
}

/// Calibrated completion under an increasing-rank schedule. Requires
/// `cfg.rank` to be [`RankPolicy::Increasing`]; with a schedule that never
/// fires this is identical to the fixed-rank run at `r0`.
pub fn run_rank_schedule(obs: &ObservationSet, cfg: &MmcConfig) -> Result<MmcResult> {
    match cfg.rank {
        RankPolicy::Increasing(_) => run(obs, cfg, GradientMode::Calibrated),
        RankPolicy::Fixed(_) => Err(MmcError::invalid(
            "run_rank_schedule needs an increasing rank policy",
        )),
    }
}

/// One-step estimator: rank-project the scaled initializer, fit the link
/// once, apply it everywhere. No gradient iterations.
pub fn mmc_one_step(
    obs: &ObservationSet,
    rank: usize,
    lipschitz: f64,
    lpav: &LpavSettings,
) -> Result<MmcResult> {
    obs.require_nonempty("one-step completion")?;
    let kmax = obs.n().min(obs.m());
    if rank == 0 || rank > kmax {
        return Err(MmcError::invalid(format!(
            "rank {rank} out of range 1..={kmax}"
        )));
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(MmcError::invalid("lipschitz bound must be finite and >= 0"));
    }
    let z = project_rank_auto(&init_z(obs)?, rank)?;
    let (zs, xs) = sorted_pairs(obs, &z);
    let problem = LpavProblem {
        z: zs,
        x: xs,
        lipschitz,
    };
    let sol = lpav_solve_cold(&problem, lpav)?;
    let g_hat = fit_monotone_fn(&problem.z, &sol.y, lipschitz)?;
    let m_hat = z.map(|v| g_hat.eval(v))?;
    let mut err_sq = 0.0;
    for (i, j, x) in obs.entries() {
        let d = g_hat.eval(z.get(*i, *j)) - x;
        err_sq += d * d;
    }
    let x_norm: f64 = obs
        .entries()
        .iter()
        .map(|(_, _, v)| v * v)
        .sum::<f64>()
        .sqrt();
    let train_rmse = (err_sq / obs.len() as f64).sqrt();
    let rel = if x_norm > 0.0 {
        err_sq.sqrt() / x_norm
    } else {
        0.0
    };
    Ok(MmcResult {
        z_hat: z,
        g_hat,
        m_hat,
        trace: vec![IterationRecord {
            iteration: 1,
            rank,
            train_rmse,
            train_rel_residual: rel,
            lpav_iterations: sol.iterations,
        }],
        converged: true,
        eta: 0.0,
    })
}

fn lpav_solve_cold(
    problem: &LpavProblem,
    settings: &LpavSettings,
) -> Result<crate::lpav::LpavSolution> {
    crate::lpav::lpav_solve(problem, settings)
}

/// Fits the one-step estimator at each candidate rank on `train`, scores it
/// on `val`, and returns the winner (smallest rank on ties) together with
/// the per-rank validation RMSEs and the winning model.
pub fn select_rank_one_step(
    train: &ObservationSet,
    val: &ObservationSet,
    ranks: &[usize],
    lipschitz: f64,
    lpav: &LpavSettings,
) -> Result<(usize, Vec<(usize, f64)>, MmcResult)> {
    if ranks.is_empty() {
        return Err(MmcError::invalid("rank selection needs candidates"));
    }
    val.require_nonempty("rank selection")?;
    let mut candidates: Vec<usize> = ranks.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64, MmcResult)> = None;
    for r in candidates {
        let fit = mmc_one_step(train, r, lipschitz, lpav)?;
        let score = rmse_on(val, &fit.m_hat)?;
        scores.push((r, score));
        if best.as_ref().map_or(true, |(_, s, _)| score < *s) {
            best = Some((r, score, fit));
        }
    }
    let (rank, _, fit) = best.expect("nonempty candidates");
    Ok((rank, scores, fit))
}
