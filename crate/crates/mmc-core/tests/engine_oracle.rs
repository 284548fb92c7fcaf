//! Cross-checks of the completion engine against independent references:
//! finite differences of quadrature-evaluated losses for the gradients, and
//! a hand-composed pipeline for the driver wiring.

mod common;

use mmc_core::engine::{
    calibrated_gradient, init_g, init_z, least_squares_gradient, mmc_calibrated, MmcConfig,
    ObservationSet,
};
use mmc_core::linalg::project_rank_auto;
use mmc_core::lpav::{fit_monotone_fn, lpav_solve, LpavProblem, LpavSettings, MonotoneFn};
use mmc_core::DenseMatrix;

fn kinky_link() -> MonotoneFn {
    // Slopes vary per segment (including a flat one) under L = 2.
    fit_monotone_fn(
        &[-2.0, -1.0, 0.0, 0.7, 1.5, 2.5],
        &[-1.5, -1.2, 0.0, 1.2, 1.2, 2.0],
        2.0,
    )
    .unwrap()
}

fn test_iterate() -> DenseMatrix {
    // Rank-2, entries spread across the link's segments, none close to a knot.
    DenseMatrix::from_fn(5, 4, |i, j| {
        0.31 * (i as f64 - 1.7) * (0.23 * j as f64 + 0.11) + 0.17 * (j as f64 - 1.3)
    })
    .unwrap()
}

fn test_observations() -> ObservationSet {
    let mut entries = Vec::new();
    for i in 0..5 {
        for j in 0..4 {
            if (i + 3 * j) % 3 != 1 {
                entries.push((i, j, 0.4 * (i as f64) - 0.3 * (j as f64)));
            }
        }
    }
    // A repeated cell: occurrences must accumulate, not overwrite.
    entries.push((2, 1, 0.25));
    entries.push((2, 1, 0.25));
    ObservationSet::new(5, 4, entries).unwrap()
}

/// Calibrated loss per occurrence: `Phi(z_ij) - x z_ij` with `Phi(t)`
/// integrating the link from 0 by Simpson quadrature split at the knots
/// (exact for a piecewise-linear integrand).
fn calibrated_loss(obs: &ObservationSet, z: &DenseMatrix, g: &MonotoneFn) -> f64 {
    let knots: Vec<f64> = g.knots().0.to_vec();
    obs.entries()
        .iter()
        .map(|(i, j, x)| {
            let t = z.get(*i, *j);
            common::simpson_integral(0.0, t, &knots, |s| g.eval(s)) - x * t
        })
        .sum()
}

fn squared_loss(obs: &ObservationSet, z: &DenseMatrix, g: &MonotoneFn) -> f64 {
    obs.entries()
        .iter()
        .map(|(i, j, x)| {
            let d = g.eval(z.get(*i, *j)) - x;
            0.5 * d * d
        })
        .sum()
}

fn central_difference(
    obs: &ObservationSet,
    z: &DenseMatrix,
    i: usize,
    j: usize,
    h: f64,
    loss: impl Fn(&ObservationSet, &DenseMatrix, &MonotoneFn) -> f64,
    g: &MonotoneFn,
) -> f64 {
    let mut up = z.clone();
    up.set(i, j, z.get(i, j) + h);
    let mut dn = z.clone();
    dn.set(i, j, z.get(i, j) - h);
    (loss(obs, &up, g) - loss(obs, &dn, g)) / (2.0 * h)
}

#[test]
fn calibrated_gradient_matches_finite_differences() {
    let g = kinky_link();
    let z = test_iterate();
    let obs = test_observations();
    let grad = calibrated_gradient(&obs, &z, &g).unwrap();
    let h = 1e-6;
    let mut checked = 0;
    for i in 0..5 {
        for j in 0..4 {
            let fd = central_difference(&obs, &z, i, j, h, calibrated_loss, &g);
            let got = grad.get(i, j);
            let tol = 1e-4 * fd.abs().max(1.0);
            assert!(
                (got - fd).abs() <= tol,
                "cell ({i},{j}): gradient {got} vs finite difference {fd}"
            );
            if got != 0.0 {
                checked += 1;
            }
        }
    }
    assert!(checked > 10, "fixture left too few active cells: {checked}");
}

#[test]
fn least_squares_gradient_matches_finite_differences() {
    let g = kinky_link();
    let z = test_iterate();
    let obs = test_observations();
    // The squared loss is only piecewise smooth; keep probe points away
    // from the knots so the central difference sees a single segment.
    let grad = least_squares_gradient(&obs, &z, &g).unwrap();
    let h = 1e-7;
    for i in 0..5 {
        for j in 0..4 {
            let t = z.get(i, j);
            let near_knot = g.knots().0.iter().any(|k| (t - k).abs() < 1e-3);
            if near_knot {
                continue;
            }
            let fd = central_difference(&obs, &z, i, j, h, squared_loss, &g);
            let got = grad.get(i, j);
            let tol = 1e-4 * fd.abs().max(1.0);
            assert!(
                (got - fd).abs() <= tol,
                "cell ({i},{j}): gradient {got} vs finite difference {fd}"
            );
        }
    }
}

#[test]
fn duplicate_occurrences_double_the_gradient() {
    let g = kinky_link();
    let z = test_iterate();
    let single = ObservationSet::new(5, 4, vec![(2, 1, 0.25)]).unwrap();
    let double = ObservationSet::new(5, 4, vec![(2, 1, 0.25), (2, 1, 0.25)]).unwrap();
    let gs = calibrated_gradient(&single, &z, &g).unwrap();
    let gd = calibrated_gradient(&double, &z, &g).unwrap();
    assert_eq!(gd.get(2, 1), 2.0 * gs.get(2, 1));
    assert_eq!(gd.get(0, 0), 0.0);
}

#[test]
fn single_iteration_run_equals_the_composed_pipeline() {
    // Dyadic values and a power-of-two observation count keep every scale
    // factor exact, so the driver must reproduce the hand-built pipeline
    // bit for bit.
    let values = [0.25, 0.5, 0.75, 1.0];
    let mut entries = Vec::new();
    let mut k = 0;
    for i in 0..4 {
        for j in 0..4 {
            if (i + j) % 2 == 0 {
                entries.push((i, j, values[k % 4]));
                k += 1;
            }
        }
    }
    let obs = ObservationSet::new(4, 4, entries).unwrap();
    let rank = 2;
    let lipschitz = 1.0;
    let eta = 1.5;

    let z0 = init_z(&obs).unwrap();
    let g0 = init_g(&obs).unwrap();
    let grad = calibrated_gradient(&obs, &z0, &g0).unwrap();
    let mut stepped = z0.clone();
    for i in 0..4 {
        for j in 0..4 {
            stepped.set(i, j, z0.get(i, j) - eta * grad.get(i, j));
        }
    }
    let z1 = project_rank_auto(&stepped, rank).unwrap();
    let mut pairs: Vec<(f64, f64)> = obs
        .entries()
        .iter()
        .map(|(i, j, v)| (z1.get(*i, *j), *v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (zs, xs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let sol = lpav_solve(
        &LpavProblem {
            z: zs.clone(),
            x: xs,
            lipschitz,
        },
        &LpavSettings::default(),
    )
    .unwrap();
    let g1 = fit_monotone_fn(&zs, &sol.y, lipschitz).unwrap();
    let m1 = z1.map(|v| g1.eval(v)).unwrap();

    let mut cfg = MmcConfig::fixed_rank(rank, lipschitz);
    cfg.max_outer_iters = 1;
    cfg.train_threshold = 0.0;
    cfg.eta = Some(eta);
    let run = mmc_calibrated(&obs, &cfg).unwrap();

    assert_eq!(run.z_hat, z1);
    assert_eq!(run.g_hat, g1);
    assert_eq!(run.m_hat, m1);
    assert_eq!(run.trace.len(), 1);
}
