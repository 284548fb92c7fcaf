//! ADMM working state for Lipschitz isotonic regression.
//!
//! Problem, after tied covariates have been grouped (weights = group sizes):
//!
//! ```text
//!   minimize    sum_i w_i (y_i - x_i)^2
//!   subject to  0 <= y_{i+1} - y_i <= b_i,   b_i = L (z_{i+1} - z_i)
//! ```
//!
//! The splitting introduces one slack per inequality. With
//! `M1[i] = e_i - e_{i+1}` (rows enforcing the lower bounds) and `M2 = -M1`
//! (upper bounds), stack `M = [M1; M2]`, `b_bar = [0; b]`, and
//! `M_bar = [M, I]` acting on the extended iterate `y_bar` (length `3f - 2`:
//! `f` values plus `2f - 2` slacks). The y-update is the equality-constrained
//! QP
//!
//! ```text
//!   [ P + gamma I   M_bar^T ] [ y_bar ]   [ -(q + gamma (u - z)) ]
//!   [ M_bar         0       ] [ nu    ] = [ b_bar                ]
//! ```
//!
//! with `P = 2 diag(w, 0)` and `q = -2 [w . x; 0]`. The z-update copies the
//! value coordinates and clamps the slack coordinates at zero; the scaled
//! dual update follows. Because `P + gamma I` is diagonal, the KKT system
//! reduces exactly (block elimination) to one symmetric positive definite
//! tridiagonal solve of size `f - 1`, whose factorization depends only on
//! the weights and `gamma`; it is computed once per workspace and reused by
//! every iteration.

use ndarray::Array2;

use crate::error::{MmcError, Result};

/// Cached LDL^T factors of a symmetric positive definite tridiagonal matrix.
#[derive(Debug, Clone)]
struct TriDiagFactor {
    diag: Vec<f64>,
    sub: Vec<f64>,
}

impl TriDiagFactor {
    fn new(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        if n > 0 {
            d[0] = diag[0];
            for i in 1..n {
                l[i - 1] = off[i - 1] / d[i - 1];
                d[i] = diag[i] - l[i - 1] * off[i - 1];
            }
        }
        TriDiagFactor { diag: d, sub: l }
    }

    fn solve_in_place(&self, r: &mut [f64]) {
        let n = self.diag.len();
        debug_assert_eq!(r.len(), n);
        for i in 1..n {
            r[i] -= self.sub[i - 1] * r[i - 1];
        }
        for i in 0..n {
            r[i] /= self.diag[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            r[i] -= self.sub[i] * r[i + 1];
        }
    }
}

/// ADMM state for one grouped problem instance.
#[derive(Debug, Clone)]
pub struct AdmmWorkspace {
    f: usize,
    gamma: f64,
    weights: Vec<f64>,
    /// Upper bounds `b_i = L (z_{i+1} - z_i)`.
    b: Vec<f64>,
    /// Diagonal of `P + gamma I`: `2 w_i + gamma` on values, `gamma` on slacks.
    h_diag: Vec<f64>,
    tri: TriDiagFactor,
    y_bar: Vec<f64>,
    z_slack: Vec<f64>,
    u_dual: Vec<f64>,
    /// Multipliers of the most recent y-update, `[nu1; nu2]`.
    nu: Vec<f64>,
    scratch: Vec<f64>,
}

impl AdmmWorkspace {
    /// Builds state for strictly increasing grouped covariates `z` with
    /// least-squares weights `w` (group sizes; `None` means all ones).
    pub fn new(z: &[f64], lipschitz: f64, gamma: f64, weights: Option<&[f64]>) -> Result<Self> {
        let f = z.len();
        if f == 0 {
            return Err(MmcError::invalid("admm workspace needs at least one point"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(MmcError::invalid(format!(
                "admm penalty gamma={gamma} must be positive and finite"
            )));
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(MmcError::invalid(format!(
                "lipschitz bound {lipschitz} must be finite and nonnegative"
            )));
        }
        for pair in z.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(MmcError::invalid(
                    "grouped covariates must be strictly increasing",
                ));
            }
        }
        let w: Vec<f64> = match weights {
            Some(w) => {
                if w.len() != f || w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(MmcError::invalid("weights must be positive, one per point"));
                }
                w.to_vec()
            }
            None => vec![1.0; f],
        };
        let b: Vec<f64> = z.windows(2).map(|p| lipschitz * (p[1] - p[0])).collect();
        let dim = 3 * f - 2;
        let mut h_diag = vec![gamma; dim];
        for i in 0..f {
            h_diag[i] = 2.0 * w[i] + gamma;
        }
        // Schur system on nu1 - nu2: 2 M1 D^{-1} M1^T + I/gamma, tridiagonal.
        let mut tri_diag = vec![0.0; f - 1];
        let mut tri_off = vec![0.0; f.saturating_sub(2)];
        for i in 0..f - 1 {
            tri_diag[i] = 2.0 * (1.0 / h_diag[i] + 1.0 / h_diag[i + 1]) + 1.0 / gamma;
            if i + 1 < f - 1 {
                tri_off[i] = -2.0 / h_diag[i + 1];
            }
        }
        Ok(AdmmWorkspace {
            f,
            gamma,
            weights: w,
            b,
            h_diag,
            tri: TriDiagFactor::new(&tri_diag, &tri_off),
            y_bar: vec![0.0; dim],
            z_slack: vec![0.0; dim],
            u_dual: vec![0.0; dim],
            nu: vec![0.0; 2 * (f - 1)],
            scratch: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        3 * self.f - 2
    }

    pub fn points(&self) -> usize {
        self.f
    }

    pub fn b_bar(&self) -> Vec<f64> {
        let mut v = vec![0.0; 2 * (self.f - 1)];
        v[self.f - 1..].copy_from_slice(&self.b);
        v
    }

    /// Seeds the iterates, e.g. from a previous solve of a same-sized
    /// problem. Lengths must equal [`Self::dim`].
    pub fn warm_start(&mut self, y_bar: &[f64], z_slack: &[f64], u_dual: &[f64]) -> Result<()> {
        let dim = self.dim();
        if y_bar.len() != dim || z_slack.len() != dim || u_dual.len() != dim {
            return Err(MmcError::invalid("warm start iterates have wrong length"));
        }
        self.y_bar.copy_from_slice(y_bar);
        self.z_slack.copy_from_slice(z_slack);
        self.u_dual.copy_from_slice(u_dual);
        Ok(())
    }

    pub fn iterates(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.y_bar, &self.z_slack, &self.u_dual)
    }

    /// Equality-constrained QP step: minimizes
    /// `sum_i w_i (y_i - x_i)^2 + (gamma/2) ||y_bar - z + u||^2` subject to
    /// `M_bar y_bar = b_bar`, by the reduced KKT solve described in the
    /// module docs. Stores and returns the new `y_bar`; the multipliers are
    /// kept in the workspace for diagnostics.
    pub fn y_update(&mut self, x: &[f64]) -> &[f64] {
        assert_eq!(x.len(), self.f, "targets must match the point count");
        let f = self.f;
        let dim = self.dim();
        // rhs1 = 2 [w . x; 0] + gamma (z - u)
        let rhs1 = &mut self.scratch;
        for i in 0..dim {
            rhs1[i] = self.gamma * (self.z_slack[i] - self.u_dual[i]);
        }
        for i in 0..f {
            rhs1[i] += 2.0 * self.weights[i] * x[i];
        }
        if f == 1 {
            self.y_bar[0] = rhs1[0] / self.h_diag[0];
            return &self.y_bar;
        }
        // g = H^{-1} rhs1; w1/w2 = M_bar g - b_bar split by constraint block.
        let ncon = f - 1;
        let mut diff = vec![0.0; ncon];
        let mut sum = vec![0.0; ncon];
        for i in 0..ncon {
            let gi = rhs1[i] / self.h_diag[i];
            let gi1 = rhs1[i + 1] / self.h_diag[i + 1];
            let s1 = rhs1[f + i] / self.h_diag[f + i];
            let s2 = rhs1[f + ncon + i] / self.h_diag[f + ncon + i];
            let w1 = (gi - gi1) + s1;
            let w2 = (gi1 - gi) + s2 - self.b[i];
            diff[i] = w1 - w2;
            sum[i] = self.gamma * (w1 + w2);
        }
        self.tri.solve_in_place(&mut diff);
        for i in 0..ncon {
            self.nu[i] = 0.5 * (sum[i] + diff[i]);
            self.nu[ncon + i] = 0.5 * (sum[i] - diff[i]);
        }
        // y_bar = H^{-1} (rhs1 - M_bar^T nu); M^T nu = M1^T (nu1 - nu2).
        for j in 0..f {
            let mut t = rhs1[j];
            if j < ncon {
                t -= diff[j];
            }
            if j > 0 {
                t += diff[j - 1];
            }
            self.y_bar[j] = t / self.h_diag[j];
        }
        for k in 0..2 * ncon {
            self.y_bar[f + k] = (rhs1[f + k] - self.nu[k]) / self.h_diag[f + k];
        }
        &self.y_bar
    }

    /// Multipliers `[nu1; nu2]` from the most recent [`Self::y_update`].
    pub fn multipliers(&self) -> &[f64] {
        &self.nu
    }

    /// Projection step: value coordinates pass through, slack coordinates
    /// clamp at zero. Returns the squared norm of `z_new - z_old` scaled by
    /// `gamma^2`: the dual residual contribution of this step.
    pub fn z_update(&mut self) -> f64 {
        let f = self.f;
        let mut dual_sq = 0.0;
        for i in 0..self.dim() {
            let cand = self.y_bar[i] + self.u_dual[i];
            let znew = if i < f { cand } else { cand.max(0.0) };
            let dz = znew - self.z_slack[i];
            dual_sq += dz * dz;
            self.z_slack[i] = znew;
        }
        self.gamma * self.gamma * dual_sq
    }

    /// Scaled dual ascent. Returns the squared primal residual norm
    /// `||y_bar - z||^2`.
    pub fn u_update(&mut self) -> f64 {
        let mut primal_sq = 0.0;
        for i in 0..self.dim() {
            let r = self.y_bar[i] - self.z_slack[i];
            primal_sq += r * r;
            self.u_dual[i] += r;
        }
        primal_sq
    }

    pub fn norms_for_stopping(&self) -> (f64, f64, f64) {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (
            norm(&self.y_bar),
            norm(&self.z_slack),
            self.gamma * norm(&self.u_dual),
        )
    }

    /// Structural nonzeros of the KKT matrix as `(row, col, value)`
    /// triplets: the diagonal `P + gamma I` block, `M_bar`, and `M_bar^T`.
    pub fn kkt_triplets(&self) -> Vec<(usize, usize, f64)> {
        let f = self.f;
        let dim = self.dim();
        let ncon = 2 * (f - 1);
        let mut t = Vec::with_capacity(dim + 4 * ncon + 2 * ncon);
        for i in 0..dim {
            t.push((i, i, self.h_diag[i]));
        }
        let mut constraint = |row: usize, col: usize, val: f64| {
            t.push((dim + row, col, val));
            t.push((col, dim + row, val));
        };
        for i in 0..f - 1 {
            // M1 row: +1 at i, -1 at i+1; slack identity.
            constraint(i, i, 1.0);
            constraint(i, i + 1, -1.0);
            constraint(i, f + i, 1.0);
            // M2 row: -1 at i, +1 at i+1; slack identity.
            constraint(f - 1 + i, i, -1.0);
            constraint(f - 1 + i, i + 1, 1.0);
            constraint(f - 1 + i, f + (f - 1) + i, 1.0);
        }
        t
    }

    /// Dense KKT matrix, for oracle comparisons in tests.
    pub fn kkt_dense(&self) -> Array2<f64> {
        let n = self.dim() + 2 * (self.f - 1);
        let mut m = Array2::zeros((n, n));
        for (i, j, v) in self.kkt_triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Right-hand side `[2 [w.x; 0] + gamma (z - u); b_bar]` matching
    /// [`Self::kkt_dense`] for the current iterates.
    pub fn kkt_rhs(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.f);
        let dim = self.dim();
        let mut rhs = vec![0.0; dim + 2 * (self.f - 1)];
        for i in 0..dim {
            rhs[i] = self.gamma * (self.z_slack[i] - self.u_dual[i]);
        }
        for i in 0..self.f {
            rhs[i] += 2.0 * self.weights[i] * x[i];
        }
        rhs[dim..].copy_from_slice(&self.b_bar());
        rhs
    }
}
