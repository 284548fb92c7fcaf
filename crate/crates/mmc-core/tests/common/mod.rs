//! Shared oracles for the integration tests.
//!
//! Everything here is deliberately independent of the library's production
//! code paths: the SVD oracle goes through an eigendecomposition of the Gram
//! matrix, linear systems are solved by dense LU, and the Lipschitz isotonic
//! oracle enumerates active sets in closed form. Keep it that way; these
//! exist to cross-check the implementation, not to share code with it.

#![allow(dead_code)]

use ndarray::Array2;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues (descending) and the matching eigenvector columns.
pub fn sym_eigen(g0: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = g0.nrows();
    assert_eq!(n, g0.ncols());
    let mut g = g0.clone();
    let mut v: Array2<f64> = Array2::eye(n);
    let scale: f64 = g.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    for _sweep in 0..200 {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let gpq = g[(p, q)];
                if gpq.abs() <= 1e-16 * scale {
                    continue;
                }
                rotated = true;
                let tau = (g[(q, q)] - g[(p, p)]) / (2.0 * gpq);
                let t = if tau.is_finite() {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                } else {
                    0.0
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let (gip, giq) = (g[(i, p)], g[(i, q)]);
                    g[(i, p)] = c * gip - s * giq;
                    g[(i, q)] = s * gip + c * giq;
                }
                for j in 0..n {
                    let (gpj, gqj) = (g[(p, j)], g[(q, j)]);
                    g[(p, j)] = c * gpj - s * gqj;
                    g[(q, j)] = s * gpj + c * gqj;
                }
                for i in 0..n {
                    let (vip, viq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g[(b, b)].partial_cmp(&g[(a, a)]).unwrap());
    let evals: Vec<f64> = order.iter().map(|&j| g[(j, j)]).collect();
    let evecs = Array2::from_shape_fn((n, n), |(i, j)| v[(i, order[j])]);
    (evals, evecs)
}

/// SVD oracle via the Gram matrix: eigendecomposition of `a^T a` gives the
/// right singular vectors and squared singular values.
pub struct GramSvd {
    pub s: Vec<f64>,
    /// Right singular vectors as columns, all `cols` of them.
    pub v: Array2<f64>,
}

pub fn gram_svd(a: &Array2<f64>) -> GramSvd {
    let g = a.t().dot(a);
    let (evals, v) = sym_eigen(&g);
    let s = evals.iter().map(|l| l.max(0.0).sqrt()).collect();
    GramSvd { s, v }
}

/// Best rank-`r` approximation from the oracle: projection of `a` onto the
/// span of its top `r` right singular vectors.
pub fn gram_truncate(a: &Array2<f64>, r: usize) -> Array2<f64> {
    let f = gram_svd(a);
    let vr = f.v.slice(ndarray::s![.., ..r]);
    a.dot(&vr).dot(&vr.t())
}

/// Dense LU solve with partial pivoting; `a` is consumed as scratch.
pub fn lu_solve(mut a: Array2<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())
            .unwrap();
        if piv != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            b.swap(col, piv);
        }
        let d = a[(col, col)];
        assert!(d.abs() > 1e-300, "singular system in lu oracle");
        for i in col + 1..n {
            let m = a[(i, col)] / d;
            if m == 0.0 {
                continue;
            }
            for j in col..n {
                a[(i, j)] -= m * a[(col, j)];
            }
            b[i] -= m * b[col];
        }
    }
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= a[(i, j)] * b[j];
        }
        b[i] = acc / a[(i, i)];
    }
    b
}

/// Exhaustive Lipschitz isotonic regression oracle.
///
/// Minimizes `sum_i (y_i - x_i)^2` subject to
/// `0 <= y_{i+1} - y_i <= bounds_i`. Every pattern over the adjacent
/// constraints (inactive / lower bound tight / upper bound tight) is tried;
/// active runs chain consecutive variables together with fixed offsets, so
/// each chain's optimum is a mean in closed form. The best strictly feasible
/// candidate is the global optimum of this strictly convex QP.
pub fn lpav_exhaustive(x: &[f64], bounds: &[f64], weights: Option<&[f64]>) -> (Vec<f64>, f64) {
    let f = x.len();
    assert!(f >= 1);
    assert_eq!(bounds.len(), f - 1);
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; f],
    };
    let n_patterns = 3usize.pow((f - 1) as u32);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut offsets = vec![0.0; f];
    let mut y = vec![0.0; f];
    let mut digits = vec![0u8; f.saturating_sub(1)];
    for pattern in 0..n_patterns {
        // Decode base-3 digits: 0 inactive, 1 lower tight, 2 upper tight.
        let mut rem = pattern;
        for d in digits.iter_mut() {
            *d = (rem % 3) as u8;
            rem /= 3;
        }
        // Chains of consecutive active constraints share one free value.
        offsets[0] = 0.0;
        let mut feasible = true;
        let mut start = 0;
        let flush_chain = |start: usize, end: usize, offsets: &[f64], y: &mut [f64]| {
            let mut sw = 0.0;
            let mut swx = 0.0;
            for i in start..=end {
                sw += w[i];
                swx += w[i] * (x[i] - offsets[i]);
            }
            let t = swx / sw;
            for i in start..=end {
                y[i] = t + offsets[i];
            }
        };
        for i in 0..f - 1 {
            match digits[i] {
                1 => offsets[i + 1] = offsets[i],
                2 => offsets[i + 1] = offsets[i] + bounds[i],
                _ => {
                    flush_chain(start, i, &offsets, &mut y);
                    start = i + 1;
                    offsets[i + 1] = 0.0;
                }
            }
        }
        flush_chain(start, f - 1, &offsets, &mut y);
        // Feasibility of the inactive constraints (actives hold by build).
        for i in 0..f - 1 {
            if digits[i] == 0 {
                let d = y[i + 1] - y[i];
                if d < -1e-11 || d > bounds[i] + 1e-11 {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        let obj: f64 = (0..f).map(|i| w[i] * (y[i] - x[i]).powi(2)).sum();
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((y.clone(), obj));
        }
    }
    best.expect("at least the fully chained pattern is feasible")
}

/// Composite Simpson integral of `f` over `[a, b]`, splitting at the given
/// breakpoints. Exact for piecewise-quadratic integrands split at their
/// kinks, which covers integrals of piecewise-linear functions.
pub fn simpson_integral(mut a: f64, b: f64, breakpoints: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let sign = if b < a { -1.0 } else { 1.0 };
    let (lo, hi) = if b < a { (b, a) } else { (a, b) };
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|t| *t > lo && *t < hi)
        .collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.push(hi);
    a = lo;
    let mut total = 0.0;
    for cut in cuts {
        let panels = 8;
        let h = (cut - a) / panels as f64;
        if h > 0.0 {
            let mut acc = f(a) + f(cut);
            for i in 1..panels {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(a + i as f64 * h);
            }
            total += acc * h / 3.0;
        }
        a = cut;
    }
    sign * total
}

#[cfg(test)]
mod oracle_self_checks {
    // The oracles are test infrastructure; give them their own smoke tests
    // where cheap. (These run from each integration-test binary that pulls
    // the module in; keep them fast.)
    use super::*;

    #[test]
    fn lu_solves_a_known_system() {
        let a = Array2::from_shape_vec((2, 2), vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        let x = lu_solve(a, vec![5.0, 10.0]);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_kinked_linear_exactly() {
        // Integral of |t| over [-1, 2] is 0.5 + 2.0.
        let v = simpson_integral(-1.0, 2.0, &[0.0], |t| t.abs());
        assert!((v - 2.5).abs() < 1e-13);
    }
}
