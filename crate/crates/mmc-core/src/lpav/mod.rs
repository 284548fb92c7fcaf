//! Lipschitz isotonic regression (LPAV).
//!
//! Fits values `y` to targets `x` over sorted covariates `z` under the
//! adjacent constraints `0 <= y_{i+1} - y_i <= L (z_{i+1} - z_i)`. Adjacent
//! constraints suffice: chaining them bounds every pair, so the fit is
//! nondecreasing and `L`-Lipschitz on the covariates. Tied covariates force
//! equal fitted values; they are grouped up front, each group entering the
//! reduced problem as one point with target = group mean and least-squares
//! weight = group size, which leaves the optimum unchanged.
//!
//! The reduced problem is solved by ADMM ([`admm::AdmmWorkspace`]); inputs
//! whose targets are already feasible short-circuit to an exact answer. The
//! returned fit is polished to exact feasibility (increments clamped into
//! their box, then the free additive constant re-optimized), so downstream
//! consumers can rely on the constraints up to 1e-6 regardless of how loose
//! the ADMM tolerances were.

pub mod admm;
pub mod monotone;

pub use admm::AdmmWorkspace;
pub use monotone::{fit_monotone_fn, MonotoneFn};

use crate::error::{MmcError, Result};

/// Constraint violations below this relative level count as input noise and
/// take the exact fast path (after polishing) instead of an ADMM solve.
const NOISE_SLACK: f64 = 1e-10;

/// One regression instance. `z` must be sorted nondecreasing (ties allowed)
/// and the same length as `x`; `lipschitz >= 0`.
#[derive(Debug, Clone)]
pub struct LpavProblem {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub lipschitz: f64,
}

/// ADMM controls. Defaults: `gamma = 1`, `eps_abs = eps_rel = 1e-2`,
/// `max_iters = 5000`.
#[derive(Debug, Clone, Copy)]
pub struct LpavSettings {
    pub gamma: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iters: usize,
}

impl Default for LpavSettings {
    fn default() -> Self {
        LpavSettings {
            gamma: 1.0,
            eps_abs: 1e-2,
            eps_rel: 1e-2,
            max_iters: 5000,
        }
    }
}

/// Solver output. `y` matches the input length (ties expanded back);
/// `objective` is `sum_i (y_i - x_i)^2` of the returned values; residual
/// norms are the final ADMM primal/dual residuals (zero when the feasible
/// fast path answered).
#[derive(Debug, Clone)]
pub struct LpavSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Grouped view of a problem: strictly increasing covariates, mean targets,
/// group sizes as weights, and the original-index spans for expansion.
struct Grouped {
    z: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
    spans: Vec<(usize, usize)>,
}

fn validate(problem: &LpavProblem, settings: &LpavSettings) -> Result<()> {
    if problem.z.is_empty() || problem.z.len() != problem.x.len() {
        return Err(MmcError::invalid(format!(
            "lpav needs matching nonempty z and x, got {} and {}",
            problem.z.len(),
            problem.x.len()
        )));
    }
    if problem.z.iter().chain(&problem.x).any(|v| !v.is_finite()) {
        return Err(MmcError::invalid("lpav inputs must be finite"));
    }
    if !(problem.lipschitz >= 0.0 && problem.lipschitz.is_finite()) {
        return Err(MmcError::invalid(format!(
            "lipschitz bound {} must be finite and nonnegative",
            problem.lipschitz
        )));
    }
    if problem.z.windows(2).any(|p| p[1] < p[0]) {
        return Err(MmcError::invalid("lpav covariates must be sorted"));
    }
    if !(settings.gamma > 0.0 && settings.gamma.is_finite()) {
        return Err(MmcError::invalid("admm gamma must be positive"));
    }
    if settings.eps_abs < 0.0 || settings.eps_rel < 0.0 || settings.max_iters == 0 {
        return Err(MmcError::invalid(
            "admm tolerances must be nonnegative and max_iters >= 1",
        ));
    }
    Ok(())
}

fn group_ties(problem: &LpavProblem) -> Grouped {
    let n = problem.z.len();
    let mut g = Grouped {
        z: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        spans: Vec::with_capacity(n),
    };
    let mut i = 0;
    while i < n {
        let zi = problem.z[i];
        let start = i;
        let mut sum = 0.0;
        while i < n && problem.z[i] == zi {
            sum += problem.x[i];
            i += 1;
        }
        let count = (i - start) as f64;
        g.z.push(zi);
        g.x.push(sum / count);
        g.w.push(count);
        g.spans.push((start, i));
    }
    g
}

/// Clamps each increment into `[0, b_i]`, rebuilds from the first value, and
/// re-optimizes the additive constant (weighted mean shift). Exactly
/// feasible by construction; a strict objective improvement over any
/// same-increments candidate.
fn polish(y: &[f64], g: &Grouped, b: &[f64]) -> Vec<f64> {
    let f = g.z.len();
    let mut out = vec![0.0; f];
    out[0] = y[0];
    for i in 0..f - 1 {
        let d = (y[i + 1] - y[i]).clamp(0.0, b[i]);
        out[i + 1] = out[i] + d;
    }
    let wsum: f64 = g.w.iter().sum();
    let shift: f64 = g
        .w
        .iter()
        .zip(g.x.iter().zip(&out))
        .map(|(w, (x, y))| w * (x - y))
        .sum::<f64>()
        / wsum;
    for v in &mut out {
        *v += shift;
    }
    out
}

fn expand_and_score(yr: &[f64], g: &Grouped, problem: &LpavProblem) -> (Vec<f64>, f64) {
    let mut y = vec![0.0; problem.z.len()];
    for (val, (start, end)) in yr.iter().zip(&g.spans) {
        y[*start..*end].fill(*val);
    }
    let objective = y
        .iter()
        .zip(&problem.x)
        .map(|(yi, xi)| (yi - xi) * (yi - xi))
        .sum();
    (y, objective)
}

/// Stateful solver that reuses the previous iterates as a warm start when
/// consecutive problems have the same grouped size (the outer completion
/// loop refits the link on slowly moving covariates every iteration).
pub struct LpavSolver {
    settings: LpavSettings,
    prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl LpavSolver {
    pub fn new(settings: LpavSettings) -> Self {
        LpavSolver {
            settings,
            prev: None,
        }
    }

    pub fn settings(&self) -> &LpavSettings {
        &self.settings
    }

    pub fn solve(&mut self, problem: &LpavProblem) -> Result<LpavSolution> {
        validate(problem, &self.settings)?;
        let g = group_ties(problem);
        let f = g.z.len();
        let b: Vec<f64> = g
            .z
            .windows(2)
            .map(|p| problem.lipschitz * (p[1] - p[0]))
            .collect();

        // Feasible targets are their own optimum: the weighted unconstrained
        // minimizer of the reduced problem is x itself. Violations at
        // floating-point noise level are repaired by the polish pass instead
        // of a full solve; rank-projected covariates routinely dent an
        // exactly feasible instance by a few ulps.
        let mut violation = 0.0f64;
        let mut scale = 1.0f64;
        for i in 0..f.saturating_sub(1) {
            let d = g.x[i + 1] - g.x[i];
            violation = violation.max(-d).max(d - b[i]);
            scale = scale.max(d.abs()).max(b[i]);
        }
        if violation <= NOISE_SLACK * scale {
            let yr = if violation <= 0.0 {
                g.x.clone()
            } else {
                polish(&g.x, &g, &b)
            };
            let (y, objective) = expand_and_score(&yr, &g, problem);
            return Ok(LpavSolution {
                y,
                objective,
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
            });
        }

        let mut ws = AdmmWorkspace::new(&g.z, problem.lipschitz, self.settings.gamma, Some(&g.w))?;
        if let Some((py, pz, pu)) = &self.prev {
            if py.len() == ws.dim() {
                ws.warm_start(py, pz, pu)?;
            }
        }

        let dim_sqrt = (ws.dim() as f64).sqrt();
        let mut iterations = 0;
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let mut converged = false;
        while iterations < self.settings.max_iters {
            ws.y_update(&g.x);
            let dual_sq = ws.z_update();
            let primal_sq = ws.u_update();
            iterations += 1;
            primal = primal_sq.sqrt();
            dual = dual_sq.sqrt();
            let (ny, nz, nyu) = ws.norms_for_stopping();
            let eps_pri = dim_sqrt * self.settings.eps_abs + self.settings.eps_rel * ny.max(nz);
            let eps_dual = dim_sqrt * self.settings.eps_abs + self.settings.eps_rel * nyu;
            if primal <= eps_pri && dual <= eps_dual {
                converged = true;
                break;
            }
        }

        let (ybar, zs, ud) = ws.iterates();
        self.prev = Some((ybar.to_vec(), zs.to_vec(), ud.to_vec()));
        if !converged {
            return Err(MmcError::AdmmNoConvergence {
                iterations,
                primal,
                dual,
            });
        }

        let yr = polish(&ws.iterates().0[..f], &g, &b);
        let (y, objective) = expand_and_score(&yr, &g, problem);
        Ok(LpavSolution {
            y,
            objective,
            iterations,
            primal_residual: primal,
            dual_residual: dual,
        })
    }
}

/// One-shot solve with cold-started iterates.
pub fn lpav_solve(problem: &LpavProblem, settings: &LpavSettings) -> Result<LpavSolution> {
    LpavSolver::new(*settings).solve(problem)
}
