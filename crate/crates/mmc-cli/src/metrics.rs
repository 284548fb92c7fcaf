//! Metric and summary records written by `complete`.
//!
//! The JSON schema is versioned; field order is fixed by declaration order.
//! `wall_time_ms` is the only field allowed to differ between identical
//! re-runs.

use mmc_core::engine::IterationRecord;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub rank: usize,
    pub train_rmse: f64,
    pub train_rel_residual: f64,
    pub lpav_iterations: usize,
}

impl From<&IterationRecord> for TraceRow {
    fn from(r: &IterationRecord) -> Self {
        TraceRow {
            iteration: r.iteration,
            rank: r.rank,
            train_rmse: r.train_rmse,
            train_rel_residual: r.train_rel_residual,
            lpav_iterations: r.lpav_iterations,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MetricsRecord {
    pub schema_version: u32,
    pub algorithm: String,
    pub dataset: String,
    pub seed: u64,
    pub final_rank: usize,
    pub converged: bool,
    pub iterations: usize,
    pub eta: f64,
    pub train_rmse: f64,
    pub val_rmse: Option<f64>,
    pub test_rmse: Option<f64>,
    /// Per-rank validation scores when mmc-1 selected the rank.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_scores: Option<Vec<(usize, f64)>>,
    pub wall_time_ms: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

/// Sample mean and standard deviation (n-1 denominator; 0 for one value).
pub fn stat(values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Stat { mean, std }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub algorithm: String,
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub train_rmse: Stat,
    pub val_rmse: Option<Stat>,
    pub test_rmse: Option<Stat>,
    pub converged_cells: usize,
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub schema_version: u32,
    pub error: String,
    pub seed: Option<u64>,
}

pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
