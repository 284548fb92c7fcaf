//! Dense SVD and the rank tools built on it.
//!
//! The exact factorization is a one-sided Jacobi SVD: Givens rotations
//! orthogonalize pairs of columns of the working matrix until every pair is
//! numerically orthogonal, at which point column norms are the singular
//! values. Slower than bidiagonalization at scale, but short, robust, and
//! accurate to close to machine precision, which is what the oracle-backed
//! tests demand; matrices in scope are desk scale. [`svd_randomized`] covers
//! truncated factorizations of larger inputs.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{MmcError, Result};
use crate::matrix::DenseMatrix;

const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 64;

/// Thin SVD truncated to `k` factors: `a ~ u * diag(s) * v^T`.
///
/// `u` is `rows x k` and `v` is `cols x k`, both with orthonormal columns;
/// `s` is nonincreasing and nonnegative. Signs are fixed so that the first
/// nonzero component of each `u` column is positive, which makes the
/// factorization deterministic for a given input.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub v: Array2<f64>,
}

/// Column-major scratch matrix; the Jacobi sweep works on whole columns.
struct ColMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMat {
    fn from_array(a: &Array2<f64>) -> Self {
        let (rows, cols) = a.dim();
        let mut data = vec![0.0; rows * cols];
        for j in 0..cols {
            for i in 0..rows {
                data[j * rows + i] = a[(i, j)];
            }
        }
        ColMat { rows, cols, data }
    }

    fn identity(n: usize) -> Self {
        let mut m = ColMat {
            rows: n,
            cols: n,
            data: vec![0.0; n * n],
        };
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn zero_col(&mut self, j: usize) {
        self.data[j * self.rows..(j + 1) * self.rows].fill(0.0);
    }

    /// Applies the rotation `[new_p, new_q] = [p, q] * [[c, s], [-s, c]]`.
    fn rotate_cols(&mut self, p: usize, q: usize, c: f64, s: f64) {
        debug_assert!(p < q);
        let (head, tail) = self.data.split_at_mut(q * self.rows);
        let cp = &mut head[p * self.rows..(p + 1) * self.rows];
        let cq = &mut tail[..self.rows];
        for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
            let (a, b) = (*xp, *xq);
            *xp = c * a - s * b;
            *xq = s * a + c * b;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// One-sided Jacobi on a matrix with `rows >= cols`. Returns the rotated
/// working matrix (whose columns are `u_j * s_j`) and the accumulated `v`.
fn one_sided_jacobi(a: &Array2<f64>) -> Result<(ColMat, ColMat)> {
    let mut w = ColMat::from_array(a);
    let mut v = ColMat::identity(w.cols);
    // Columns whose mass collapses below working precision relative to the
    // whole matrix carry numerically-zero singular values. Flush them to
    // exact zero: a near-zero leftover can stay parallel to a large column,
    // and rotating such a pair shrinks it forever without converging.
    let frob_sq: f64 = a.iter().map(|x| x * x).sum();
    let zero_floor = f64::EPSILON * f64::EPSILON * frob_sq;
    for _sweep in 0..MAX_SWEEPS {
        for j in 0..w.cols {
            let nj = norm_sq(w.col(j));
            if nj > 0.0 && nj <= zero_floor {
                w.zero_col(j);
            }
        }
        let mut rotated = false;
        for p in 0..w.cols.saturating_sub(1) {
            for q in p + 1..w.cols {
                let alpha = norm_sq(w.col(p));
                let beta = norm_sq(w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                if !zeta.is_finite() {
                    continue;
                }
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                w.rotate_cols(p, q, c, s);
                v.rotate_cols(p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(MmcError::SvdNoConvergence { sweeps: MAX_SWEEPS })
}

/// Appends to `u` (given as columns) a unit vector orthogonal to all current
/// columns, built from the best coordinate vector and re-orthogonalized.
fn complete_column(cols: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..dim {
        let mut w = vec![0.0; dim];
        w[e] = 1.0;
        for _ in 0..2 {
            for c in cols {
                let proj = dot(&w, c);
                for (wi, ci) in w.iter_mut().zip(c) {
                    *wi -= proj * ci;
                }
            }
        }
        let n = norm_sq(&w).sqrt();
        if n > 0.5 {
            for wi in &mut w {
                *wi /= n;
            }
            return w;
        }
        if best.as_ref().map_or(true, |(bn, _)| n > *bn) {
            best = Some((n, w));
        }
    }
    let (n, mut w) = best.expect("dim >= 1");
    assert!(n > 0.0, "orthogonal complement exhausted");
    for wi in &mut w {
        *wi /= n;
    }
    w
}

/// Full thin SVD with `min(rows, cols)` factors.
pub fn svd_full(a: &DenseMatrix) -> Result<SvdFactors> {
    let (n, m) = (a.rows(), a.cols());
    let transposed = n < m;
    let work = if transposed {
        a.array().t().to_owned()
    } else {
        a.array().clone()
    };
    let (rows, cols) = work.dim();
    let (w, v) = one_sided_jacobi(&work)?;

    let mut order: Vec<usize> = (0..cols).collect();
    let sigmas: Vec<f64> = (0..cols).map(|j| norm_sq(w.col(j)).sqrt()).collect();
    order.sort_by(|&i, &j| sigmas[j].partial_cmp(&sigmas[i]).expect("finite"));

    let s_max = sigmas[order[0]];
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut s = Vec::with_capacity(cols);
    for &j in &order {
        let sigma = sigmas[j];
        s.push(sigma);
        v_cols.push(v.col(j).to_vec());
        if sigma > s_max * 1e-13 && sigma > 0.0 {
            u_cols.push(w.col(j).iter().map(|x| x / sigma).collect());
        } else {
            u_cols.push(complete_column(&u_cols, rows));
        }
    }

    // Sign rule: first nonzero component of each u column nonnegative.
    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        if let Some(&lead) = uc.iter().find(|x| **x != 0.0) {
            if lead < 0.0 {
                uc.iter_mut().for_each(|x| *x = -*x);
                vc.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    let from_cols = |cols_vec: &[Vec<f64>], dim: usize| {
        Array2::from_shape_fn((dim, cols_vec.len()), |(i, j)| cols_vec[j][i])
    };
    let (u, v) = if transposed {
        (from_cols(&v_cols, cols), from_cols(&u_cols, rows))
    } else {
        (from_cols(&u_cols, rows), from_cols(&v_cols, cols))
    };
    Ok(SvdFactors { u, s, v })
}

/// Thin SVD truncated to the top `k` factors, `1 <= k <= min(rows, cols)`.
pub fn svd(a: &DenseMatrix, k: usize) -> Result<SvdFactors> {
    let kmax = a.rows().min(a.cols());
    if k == 0 || k > kmax {
        return Err(MmcError::invalid(format!(
            "svd truncation k={k} out of range 1..={kmax}"
        )));
    }
    let full = svd_full(a)?;
    Ok(truncate_factors(full, k))
}

fn truncate_factors(f: SvdFactors, k: usize) -> SvdFactors {
    SvdFactors {
        u: f.u.slice(ndarray::s![.., ..k]).to_owned(),
        s: f.s[..k].to_vec(),
        v: f.v.slice(ndarray::s![.., ..k]).to_owned(),
    }
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(svd_full(a)?.s)
}

fn reconstruct(f: &SvdFactors) -> Array2<f64> {
    let mut scaled = f.u.clone();
    for (j, sigma) in f.s.iter().enumerate() {
        scaled.column_mut(j).map_inplace(|x| *x *= sigma);
    }
    scaled.dot(&f.v.t())
}

/// Nearest matrix of rank at most `r` in Frobenius norm (SVD truncation).
///
/// For `r >= min(rows, cols)` the input is returned unchanged.
pub fn project_rank(a: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    if r == 0 {
        return Err(MmcError::invalid("rank projection needs r >= 1"));
    }
    if r >= a.rows().min(a.cols()) {
        return Ok(a.clone());
    }
    let f = svd(a, r)?;
    DenseMatrix::from_array(reconstruct(&f))
}

/// Smallest `k` such that the singular-value tail past `k` holds at most an
/// `eps` fraction of the spectrum energy:
/// `sqrt(sum_{j>k} s_j^2 / sum_j s_j^2) <= eps`.
pub fn effective_rank(a: &DenseMatrix, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MmcError::invalid(format!(
            "effective rank threshold eps={eps} must lie in (0, 1)"
        )));
    }
    let s = singular_values(a)?;
    // Suffix sums accumulated from the tail for accuracy.
    let mut tail = vec![0.0; s.len() + 1];
    for j in (0..s.len()).rev() {
        tail[j] = tail[j + 1] + s[j] * s[j];
    }
    let total = tail[0];
    if total == 0.0 {
        return Err(MmcError::invalid(
            "effective rank of the zero matrix is undefined",
        ));
    }
    for k in 1..=s.len() {
        if tail[k] <= eps * eps * total {
            return Ok(k);
        }
    }
    Ok(s.len())
}

pub fn frobenius(a: &DenseMatrix) -> f64 {
    a.array().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(svd_full(a)?.s[0])
}

/// Modified Gram-Schmidt with one re-orthogonalization pass; returns a
/// matrix with orthonormal columns spanning the columns of `y`.
fn orthonormalize(y: &Array2<f64>) -> Array2<f64> {
    let (n, k) = y.dim();
    let mut q = y.clone();
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i).to_owned();
                let proj = q.column(j).dot(&qi);
                let mut cj = q.column_mut(j);
                cj.scaled_add(-proj, &qi);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm > 1e-300 {
            q.column_mut(j).map_inplace(|x| *x /= norm);
        } else {
            // Degenerate direction: replace with a completed basis vector.
            let cols: Vec<Vec<f64>> = (0..j).map(|i| q.column(i).to_vec()).collect();
            let w = complete_column(&cols, n);
            for (i, wi) in w.iter().enumerate() {
                q[(i, j)] = *wi;
            }
        }
    }
    q
}

/// Truncated SVD by randomized subspace iteration with a fixed internal
/// seed, so the result is a deterministic function of the input. Accuracy
/// tracks the decay of the spectrum past `k`; use [`svd`] when the exact
/// truncation matters.
pub fn svd_randomized(
    a: &DenseMatrix,
    k: usize,
    oversample: usize,
    power_iters: usize,
) -> Result<SvdFactors> {
    let kmax = a.rows().min(a.cols());
    if k == 0 || k > kmax {
        return Err(MmcError::invalid(format!(
            "svd truncation k={k} out of range 1..={kmax}"
        )));
    }
    let p = (k + oversample).min(kmax);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6d_635f_7376_6404);
    let arr = a.array();
    let sketch = Array2::from_shape_fn((a.cols(), p), |_| rng.sample::<f64, _>(StandardNormal));
    let mut q = orthonormalize(&arr.dot(&sketch));
    for _ in 0..power_iters {
        let z = orthonormalize(&arr.t().dot(&q));
        q = orthonormalize(&arr.dot(&z));
    }
    let b = DenseMatrix::from_array(q.t().dot(arr))?;
    let fb = svd_full(&b)?;
    let f = SvdFactors {
        u: q.dot(&fb.u),
        s: fb.s,
        v: fb.v,
    };
    Ok(truncate_factors(f, k))
}

/// Rank truncation that switches to the randomized path for large inputs
/// where the target rank is a small fraction of the spectrum. Exact at and
/// below desk scale.
pub fn project_rank_auto(a: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let kmax = a.rows().min(a.cols());
    if r >= kmax || kmax <= 192 || r > kmax / 6 {
        return project_rank(a, r);
    }
    let f = svd_randomized(a, r, 8, 4)?;
    DenseMatrix::from_array(reconstruct(&f))
}
