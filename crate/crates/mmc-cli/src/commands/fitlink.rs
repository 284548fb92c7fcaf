//! `mmc fitlink`: fit the closest monotone, Lipschitz-bounded function to
//! scattered `(z, x)` pairs and write the knot table plus solver
//! diagnostics.
//!
//! Inputs are two matching-length value files (any dense CSV layout; cells
//! are flattened row-major). Output is `link.csv` with `z,y` knot rows and
//! `diagnostics.json`. A solver that stops without converging still writes
//! diagnostics, then the command exits nonzero.

use crate::config::resolve_out;
use crate::metrics::{write_json, SCHEMA_VERSION};
use crate::FitlinkArgs;
use anyhow::{anyhow, bail, Context, Result};
use mmc_core::data::parse_dense;
use mmc_core::lpav::{fit_monotone_fn, lpav_solve, LpavProblem, LpavSettings};
use mmc_core::MmcError;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Serialize)]
struct Diagnostics {
    schema_version: u32,
    lipschitz: f64,
    points: usize,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let m = parse_dense(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::with_capacity(m.rows() * m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            values.push(m.get(i, j));
        }
    }
    Ok(values)
}

pub fn run(args: FitlinkArgs) -> Result<()> {
    let z = read_values(&args.z)?;
    let x = read_values(&args.x)?;
    if z.len() != x.len() {
        bail!("z has {} values but x has {}", z.len(), x.len());
    }
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(x[a].total_cmp(&x[b])));
    let problem = LpavProblem {
        z: order.iter().map(|&k| z[k]).collect(),
        x: order.iter().map(|&k| x[k]).collect(),
        lipschitz: args.lipschitz,
    };
    let settings = LpavSettings {
        gamma: args.gamma,
        eps_abs: args.eps_abs,
        eps_rel: args.eps_rel,
        max_iters: args.max_iters,
    };

    let out = resolve_out(&args.out);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let solution = match lpav_solve(&problem, &settings) {
        Ok(s) => s,
        Err(MmcError::AdmmNoConvergence {
            iterations,
            primal,
            dual,
        }) => {
            let diag = Diagnostics {
                schema_version: SCHEMA_VERSION,
                lipschitz: args.lipschitz,
                points: problem.z.len(),
                converged: false,
                objective: None,
                iterations,
                primal_residual: primal,
                dual_residual: dual,
            };
            write_json(&out.join("diagnostics.json"), &diag)?;
            return Err(anyhow!(
                "solver stopped after {iterations} iterations without converging \
                 (primal {primal:.3e}, dual {dual:.3e})"
            ));
        }
        Err(err) => return Err(err.into()),
    };

    let fitted = fit_monotone_fn(&problem.z, &solution.y, args.lipschitz)?;
    let (kz, ky) = fitted.knots();
    let mut csv = String::from("z,y\n");
    for (a, b) in kz.iter().zip(ky) {
        let _ = writeln!(csv, "{a},{b}");
    }
    std::fs::write(out.join("link.csv"), csv)?;
    let diag = Diagnostics {
        schema_version: SCHEMA_VERSION,
        lipschitz: args.lipschitz,
        points: problem.z.len(),
        converged: true,
        objective: Some(solution.objective),
        iterations: solution.iterations,
        primal_residual: solution.primal_residual,
        dual_residual: solution.dual_residual,
    };
    write_json(&out.join("diagnostics.json"), &diag)?;
    println!(
        "fitted {} knots from {} points; objective {:.6e}, {} iterations",
        kz.len(),
        problem.z.len(),
        solution.objective,
        solution.iterations,
    );
    Ok(())
}
