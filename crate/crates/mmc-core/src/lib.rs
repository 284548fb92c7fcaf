//! Monotonic matrix completion.
//!
//! Recovers a matrix `M = g(Z)` from partial, possibly noisy observations,
//! where `Z` is low rank and `g` is an unknown nondecreasing Lipschitz link
//! function. The link can drive the effective rank of `M` far above the rank
//! of `Z`, which defeats plain low-rank completion; the solvers here
//! alternate rank-constrained projected gradient steps on `Z` with link
//! estimation by Lipschitz isotonic regression (LPAV).
//!
//! Module map:
//! - [`matrix`]: dense row-major matrix type shared by the other modules
//! - [`linalg`]: SVD, rank projection, effective rank, norms
//! - [`lpav`]: Lipschitz isotonic regression via ADMM, monotone link type
//! - [`engine`]: the completion solvers and their diagnostics
//! - [`data`]: synthetic generators, observation sampling, CSV/JSON I/O

pub mod data;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod lpav;
pub mod matrix;

pub use error::{MmcError, Result};
pub use matrix::DenseMatrix;
