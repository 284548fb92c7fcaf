//! Cross-checks of the production SVD against the Gram-matrix oracle.

mod common;

use mmc_core::linalg::{project_rank, singular_values, svd, svd_full};
use mmc_core::DenseMatrix;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

#[test]
fn singular_values_match_gram_oracle_on_seeded_8x6() {
    let a = random_matrix(8, 6, 42);
    let s = singular_values(&a).unwrap();
    let oracle = common::gram_svd(a.array());
    assert_eq!(s.len(), 6);
    for (got, want) in s.iter().zip(&oracle.s) {
        assert!(
            (got - want).abs() < 1e-8,
            "sigma {got} vs oracle {want}"
        );
    }
    let f = svd_full(&a).unwrap();
    let gu = f.u.t().dot(&f.u);
    let gv = f.v.t().dot(&f.v);
    for i in 0..6 {
        for j in 0..6 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((gu[(i, j)] - want).abs() < 1e-8);
            assert!((gv[(i, j)] - want).abs() < 1e-8);
        }
    }
}

#[test]
fn rank_projection_matches_oracle_truncation_over_100_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..100u64 {
        let rows = rng.random_range(2..=50);
        let cols = rng.random_range(2..=40);
        let r = rng.random_range(1..=rows.min(cols));
        let a = random_matrix(rows, cols, 1000 + case);
        let got = project_rank(&a, r).unwrap();
        let want = common::gram_truncate(a.array(), r);
        let mut err: f64 = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                err += (got.get(i, j) - want[(i, j)]).powi(2);
            }
        }
        assert!(
            err.sqrt() < 1e-8,
            "case {case}: {rows}x{cols} rank {r} differs from oracle by {:.3e}",
            err.sqrt()
        );
    }
}

#[test]
fn truncated_svd_factors_agree_with_oracle_energies() {
    let a = random_matrix(12, 9, 7);
    let f = svd(&a, 4).unwrap();
    let oracle = common::gram_svd(a.array());
    for j in 0..4 {
        assert!((f.s[j] - oracle.s[j]).abs() < 1e-9);
    }
    // Residual energy after removing the truncation equals the tail energy.
    let mut scaled = f.u.clone();
    for j in 0..4 {
        scaled.column_mut(j).map_inplace(|x| *x *= f.s[j]);
    }
    let resid = a.array() - &scaled.dot(&f.v.t());
    let resid_energy: f64 = resid.iter().map(|x| x * x).sum();
    let tail: f64 = oracle.s[4..].iter().map(|s| s * s).sum();
    assert!((resid_energy - tail).abs() < 1e-9);
}

#[test]
fn oracle_eigendecomposition_reconstructs_gram() {
    // Sanity check of the oracle itself on a fixed symmetric matrix.
    let a = random_matrix(5, 5, 11);
    let g = a.array().t().dot(a.array());
    let (evals, evecs) = common::sym_eigen(&g);
    let lambda = Array2::from_diag(&ndarray::Array1::from_vec(evals));
    let rec = evecs.dot(&lambda).dot(&evecs.t());
    for i in 0..5 {
        for j in 0..5 {
            assert!((rec[(i, j)] - g[(i, j)]).abs() < 1e-10);
        }
    }
}
