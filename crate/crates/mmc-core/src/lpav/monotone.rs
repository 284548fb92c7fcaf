//! Piecewise-linear nondecreasing Lipschitz functions.
//!
//! [`MonotoneFn`] is the estimated link: knots at sorted covariate values,
//! nondecreasing knot values with adjacent slopes in `[0, L]`, constant
//! (clamped) extrapolation outside the knot range.

use crate::error::{MmcError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneFn {
    knots_z: Vec<f64>,
    knots_y: Vec<f64>,
    lipschitz: f64,
}

impl MonotoneFn {
    /// Fits knots from `(z, y)` pairs: sorts by `z`, merges tied `z` values
    /// to the mean of their `y`s, then repairs slopes into `[0, L]` with a
    /// single forward pass. The repair is meant for inputs that are already
    /// feasible up to solver tolerance; it moves each value by at most the
    /// accumulated constraint violation.
    pub fn fit(z: &[f64], y: &[f64], lipschitz: f64) -> Result<Self> {
        if z.is_empty() || z.len() != y.len() {
            return Err(MmcError::invalid(format!(
                "knot fit needs matching nonempty inputs, got {} and {}",
                z.len(),
                y.len()
            )));
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(MmcError::invalid(format!(
                "lipschitz bound {lipschitz} must be finite and nonnegative"
            )));
        }
        if z.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(MmcError::invalid("knot fit inputs must be finite"));
        }
        let mut order: Vec<usize> = (0..z.len()).collect();
        order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));

        let mut knots_z: Vec<f64> = Vec::with_capacity(z.len());
        let mut knots_y: Vec<f64> = Vec::with_capacity(z.len());
        let mut i = 0;
        while i < order.len() {
            let zi = z[order[i]];
            let mut sum = 0.0;
            let mut count = 0.0;
            while i < order.len() && z[order[i]] == zi {
                sum += y[order[i]];
                count += 1.0;
                i += 1;
            }
            knots_z.push(zi);
            knots_y.push(sum / count);
        }

        for i in 1..knots_y.len() {
            let dz = knots_z[i] - knots_z[i - 1];
            let dy = (knots_y[i] - knots_y[i - 1]).clamp(0.0, lipschitz * dz);
            knots_y[i] = knots_y[i - 1] + dy;
        }

        Ok(MonotoneFn {
            knots_z,
            knots_y,
            lipschitz,
        })
    }

    /// Piecewise-linear interpolation, clamped to the boundary knot values
    /// outside the knot range. Returns the stored value exactly at a knot.
    pub fn eval(&self, t: f64) -> f64 {
        let z = &self.knots_z;
        let y = &self.knots_y;
        if t <= z[0] {
            return y[0];
        }
        if t >= z[z.len() - 1] {
            return y[y.len() - 1];
        }
        // First index with z[idx] >= t; t is strictly inside the range.
        let idx = z.partition_point(|&k| k < t);
        if z[idx] == t {
            return y[idx];
        }
        let (z0, z1) = (z[idx - 1], z[idx]);
        let mu = (z1 - t) / (z1 - z0);
        mu * y[idx - 1] + (1.0 - mu) * y[idx]
    }

    /// Slope of the segment containing `t`; zero outside the knot range; the
    /// mean of the two adjacent slopes exactly at a knot (boundary knots
    /// take the flat outside extrapolation as one side).
    pub fn subgradient(&self, t: f64) -> f64 {
        let z = &self.knots_z;
        if t < z[0] || t > z[z.len() - 1] {
            return 0.0;
        }
        let idx = z.partition_point(|&k| k < t);
        if idx < z.len() && z[idx] == t {
            let left = if idx == 0 { 0.0 } else { self.segment_slope(idx - 1) };
            let right = if idx + 1 == z.len() {
                0.0
            } else {
                self.segment_slope(idx)
            };
            return 0.5 * (left + right);
        }
        self.segment_slope(idx - 1)
    }

    fn segment_slope(&self, seg: usize) -> f64 {
        (self.knots_y[seg + 1] - self.knots_y[seg]) / (self.knots_z[seg + 1] - self.knots_z[seg])
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.knots_z, &self.knots_y)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Smallest attainable value (the first knot's value).
    pub fn min_value(&self) -> f64 {
        self.knots_y[0]
    }

    /// Largest attainable value (the last knot's value).
    pub fn max_value(&self) -> f64 {
        *self.knots_y.last().expect("nonempty")
    }
}

/// Free-function spelling of [`MonotoneFn::fit`].
pub fn fit_monotone_fn(z: &[f64], y: &[f64], lipschitz: f64) -> Result<MonotoneFn> {
    MonotoneFn::fit(z, y, lipschitz)
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_fit() -> impl Strategy<Value = (MonotoneFn, Vec<f64>)> {
        (2usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(-100.0f64..100.0, n),
                0.1f64..10.0,
                proptest::collection::vec(-120.0f64..120.0, 16),
            )
                .prop_map(|(z, y, l, probes)| (MonotoneFn::fit(&z, &y, l).unwrap(), probes))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn eval_is_monotone_and_lipschitz((f, probes) in arb_fit()) {
            let mut pts = probes;
            pts.sort_by(|a, b| a.total_cmp(b));
            for w in pts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (fa, fb) = (f.eval(a), f.eval(b));
                prop_assert!(fb >= fa - 1e-12);
                prop_assert!(fb - fa <= f.lipschitz() * (b - a) + 1e-9);
            }
        }

        #[test]
        fn subgradient_matches_difference_quotient((f, probes) in arb_fit()) {
            let (kz, _) = f.knots();
            let h = 1e-6;
            for &t in &probes {
                // Stay a safe distance from every kink.
                if kz.iter().any(|k| (t - k).abs() < 1e-3) {
                    continue;
                }
                let fd = (f.eval(t + h) - f.eval(t - h)) / (2.0 * h);
                prop_assert!((f.subgradient(t) - fd).abs() < 1e-4);
            }
        }

        #[test]
        fn knots_are_strict_and_values_feasible((f, _) in arb_fit()) {
            let (kz, ky) = f.knots();
            for i in 1..kz.len() {
                prop_assert!(kz[i] > kz[i - 1]);
                let dy = ky[i] - ky[i - 1];
                prop_assert!(dy >= 0.0);
                prop_assert!(dy <= f.lipschitz() * (kz[i] - kz[i - 1]) + 1e-6);
            }
        }
    }
}
