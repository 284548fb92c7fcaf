//! Config file layer and output-path resolution.
//!
//! `complete` accepts a flat TOML file mirroring its long flags (dashes as
//! underscores, `[synth]` as a table). Precedence is flags over file over
//! defaults; unknown keys are rejected so typos fail loudly.

use anyhow::{Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub algorithm: Option<String>,
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub one_indexed: Option<bool>,
    pub synth: Option<SynthTable>,
    pub rank: Option<usize>,
    pub ranks: Option<Vec<usize>>,
    pub schedule: Option<String>,
    pub lipschitz: Option<f64>,
    pub eta: Option<f64>,
    pub max_iters: Option<usize>,
    pub threshold: Option<f64>,
    pub gamma: Option<f64>,
    pub eps_abs: Option<f64>,
    pub eps_rel: Option<f64>,
    pub admm_max_iters: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthTable {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub c: f64,
    pub p: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub bound: bool,
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Relative output paths are joined under `MMC_OUT_ROOT` when that variable
/// is set; absolute paths are used as given.
pub fn resolve_out(out: &Path) -> PathBuf {
    if out.is_absolute() {
        return out.to_path_buf();
    }
    match std::env::var_os("MMC_OUT_ROOT") {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(out),
        _ => out.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        let err = toml::from_str::<ConfigFile>("rnak = 3").unwrap_err();
        assert!(err.to_string().contains("rnak"));
    }

    #[test]
    fn parses_a_full_table() {
        let cfg: ConfigFile = toml::from_str(
            "algorithm = \"mmc-c\"\nrank = 5\nseeds = [1, 2]\n[synth]\nn = 30\nm = 20\nr = 5\nc = 10.0\np = 0.35\n",
        )
        .unwrap();
        assert_eq!(cfg.rank, Some(5));
        assert_eq!(cfg.seeds.as_deref(), Some(&[1, 2][..]));
        let synth = cfg.synth.unwrap();
        assert_eq!((synth.n, synth.m, synth.r), (30, 20, 5));
        assert_eq!(synth.noise_sd, 0.0);
        assert!(!synth.bound);
    }
}
