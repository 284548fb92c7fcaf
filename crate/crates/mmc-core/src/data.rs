//! Synthetic data generation, observation sampling, dataset files, and
//! train/validation/test splits.
//!
//! All randomness comes from a seedable portable generator (ChaCha8) with a
//! fixed stream per purpose, so every artifact is bit-reproducible from its
//! seed alone: factor matrices and noise never share draws with masks or
//! splits, and changing one purpose's parameters cannot shift another's
//! output.
//!
//! File formats:
//! - triplets: header line `n,m`, then one `row,col,value` line per
//!   occurrence; indices are written 0-indexed unless the format says
//!   otherwise
//! - dense grid: one CSV line per row, rectangular
//! - metadata sidecar at `<path>.meta.json`: `{"n", "m", "indexing",
//!   "source"}`
//!
//! Values are printed with Rust's shortest-roundtrip `f64` formatting, so a
//! write-then-parse cycle reproduces the exact bits.

use crate::engine::ObservationSet;
use crate::error::{MmcError, Result};
use crate::matrix::DenseMatrix;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use std::path::Path;

const STREAM_FACTORS: u64 = 0;
const STREAM_MASK: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_NOISE: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Scaled logistic `1 / (1 + exp(-c t))`; nondecreasing in `t` with
/// Lipschitz constant `c / 4`.
pub fn logistic(c: f64, t: f64) -> f64 {
    1.0 / (1.0 + (-c * t).exp())
}

/// Synthetic problem description: an `n x m` matrix of rank `r` pushed
/// through the scaled logistic, observed per-cell with probability `p`.
///
/// `noise_sd = 0` is the noiseless setting. With `bound_values` set, noise
/// draws are rejected until `|value| <= 1`, matching the bounded-observation
/// model; by default the noise is unbounded Gaussian.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub c: f64,
    pub p: f64,
    pub noise_sd: f64,
    pub bound_values: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(MmcError::invalid("synthetic shape must be at least 1x1"));
        }
        if self.r == 0 || self.r > self.n.min(self.m) {
            return Err(MmcError::invalid(format!(
                "synthetic rank {} out of range 1..={}",
                self.r,
                self.n.min(self.m)
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(MmcError::invalid("logistic steepness c must be positive"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(MmcError::invalid("observation probability p must be in (0, 1]"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(MmcError::invalid("noise_sd must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Output of [`gen_synthetic`]: the low-rank matrix, its linked image, the
/// (possibly noisy) observed matrix, and the Bernoulli train/heldout sets.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub z_star: DenseMatrix,
    pub m_star: DenseMatrix,
    pub x: DenseMatrix,
    pub train: ObservationSet,
    pub heldout: ObservationSet,
}

/// Generates `Z* = G1 G2` from standard Gaussian factors, `M*` through the
/// scaled logistic, adds noise, and samples each cell into the training set
/// independently with probability `p`; the heldout set is the complement.
/// Bit-reproducible per seed.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut factor_rng = stream_rng(spec.seed, STREAM_FACTORS);
    let g1 = Array2::<f64>::from_shape_fn((spec.n, spec.r), |_| {
        factor_rng.sample::<f64, _>(StandardNormal)
    });
    let g2 = Array2::<f64>::from_shape_fn((spec.r, spec.m), |_| {
        factor_rng.sample::<f64, _>(StandardNormal)
    });
    let z_star = DenseMatrix::from_array(g1.dot(&g2))?;
    let m_star = z_star.map(|t| logistic(spec.c, t))?;

    let x = if spec.noise_sd > 0.0 {
        let mut noise_rng = stream_rng(spec.seed, STREAM_NOISE);
        let mut x = m_star.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let base = m_star.get(i, j);
                let mut value = base + spec.noise_sd * noise_rng.sample::<f64, _>(StandardNormal);
                if spec.bound_values {
                    let mut tries = 0;
                    while value.abs() > 1.0 {
                        tries += 1;
                        if tries > 1000 {
                            return Err(MmcError::Numerical(
                                "bounded noise rejection did not terminate".into(),
                            ));
                        }
                        value = base + spec.noise_sd * noise_rng.sample::<f64, _>(StandardNormal);
                    }
                }
                x.set(i, j, value);
            }
        }
        x
    } else {
        m_star.clone()
    };

    let mut mask_rng = stream_rng(spec.seed, STREAM_MASK);
    let (train, heldout) = bernoulli_split(&x, spec.p, &mut mask_rng)?;
    Ok(SyntheticData {
        z_star,
        m_star,
        x,
        train,
        heldout,
    })
}

fn bernoulli_split(
    x: &DenseMatrix,
    p: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(ObservationSet, ObservationSet)> {
    let mut seen = Vec::new();
    let mut rest = Vec::new();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if rng.random::<f64>() < p {
                seen.push((i, j, x.get(i, j)));
            } else {
                rest.push((i, j, x.get(i, j)));
            }
        }
    }
    Ok((
        ObservationSet::new(x.rows(), x.cols(), seen)?,
        ObservationSet::new(x.rows(), x.cols(), rest)?,
    ))
}

/// How to draw observations from a fully known matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleMode {
    /// Each cell independently with this probability.
    Bernoulli(f64),
    /// This many cells uniformly with replacement (duplicates possible).
    WithReplacement(usize),
}

/// Samples observations of `x` under `mode`. Returns the drawn multiset and
/// the complement (cells never drawn), both valued from `x`.
pub fn sample_observations(
    x: &DenseMatrix,
    mode: SampleMode,
    seed: u64,
) -> Result<(ObservationSet, ObservationSet)> {
    let mut rng = stream_rng(seed, STREAM_MASK);
    match mode {
        SampleMode::Bernoulli(p) => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(MmcError::invalid("observation probability p must be in (0, 1]"));
            }
            bernoulli_split(x, p, &mut rng)
        }
        SampleMode::WithReplacement(k) => {
            if k == 0 {
                return Err(MmcError::invalid("with-replacement draw count must be >= 1"));
            }
            let (n, m) = (x.rows(), x.cols());
            let mut hit = vec![false; n * m];
            let mut drawn = Vec::with_capacity(k);
            for _ in 0..k {
                let idx = rng.random_range(0..n * m);
                let (i, j) = (idx / m, idx % m);
                hit[idx] = true;
                drawn.push((i, j, x.get(i, j)));
            }
            let mut rest = Vec::new();
            for i in 0..n {
                for j in 0..m {
                    if !hit[i * m + j] {
                        rest.push((i, j, x.get(i, j)));
                    }
                }
            }
            Ok((
                ObservationSet::new(n, m, drawn)?,
                ObservationSet::new(n, m, rest)?,
            ))
        }
    }
}

/// Triplet file conventions. `one_indexed` inputs are converted to
/// 0-indexed on parse and shifted back on write.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TripletFormat {
    pub one_indexed: bool,
}

fn parse_err(line: usize, msg: impl Into<String>) -> MmcError {
    MmcError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses a triplet file: header `n,m`, then `row,col,value` lines. Blank
/// interior lines are rejected; at least one observation is required.
pub fn parse_triplets(path: impl AsRef<Path>, format: TripletFormat) -> Result<ObservationSet> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing n,m header"))?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(parse_err(1, format!("header must be n,m; got {header:?}")));
    }
    let n: usize = dims[0]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad row count: {e}")))?;
    let m: usize = dims[1]
        .trim()
        .parse()
        .map_err(|e| parse_err(1, format!("bad column count: {e}")))?;

    let mut entries = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                lineno,
                format!("expected row,col,value; got {line:?}"),
            ));
        }
        let mut row: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad row index: {e}")))?;
        let mut col: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad column index: {e}")))?;
        let value: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad value: {e}")))?;
        if !value.is_finite() {
            return Err(parse_err(lineno, format!("non-finite value {value}")));
        }
        if format.one_indexed {
            if row == 0 || col == 0 {
                return Err(parse_err(lineno, "1-indexed file contains index 0"));
            }
            row -= 1;
            col -= 1;
        }
        entries.push((row, col, value));
    }
    if entries.is_empty() {
        return Err(MmcError::invalid("triplet file declares no observations"));
    }
    ObservationSet::new(n, m, entries)
}

/// Writes `obs` in triplet format plus a `<path>.meta.json` sidecar noting
/// the shape, indexing convention, and `source` label.
pub fn write_triplets(
    path: impl AsRef<Path>,
    obs: &ObservationSet,
    format: TripletFormat,
    source: &str,
) -> Result<()> {
    let path = path.as_ref();
    let shift = usize::from(format.one_indexed);
    let mut out = String::new();
    let _ = writeln!(out, "{},{}", obs.n(), obs.m());
    for (i, j, v) in obs.entries() {
        let _ = writeln!(out, "{},{},{}", i + shift, j + shift, v);
    }
    std::fs::write(path, out)?;
    write_sidecar(path, obs.n(), obs.m(), format, source)
}

fn json_escape(s: &str) -> String {
    s.chars()
        .flat_map(|ch| match ch {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            c if (c as u32) < 0x20 => format!("\\u{:04x}", c as u32).chars().collect(),
            c => vec![c],
        })
        .collect()
}

fn write_sidecar(
    path: &Path,
    n: usize,
    m: usize,
    format: TripletFormat,
    source: &str,
) -> Result<()> {
    let indexing = if format.one_indexed { "one" } else { "zero" };
    let meta = format!(
        "{{\"n\":{n},\"m\":{m},\"indexing\":\"{indexing}\",\"source\":\"{}\"}}\n",
        json_escape(source)
    );
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".meta.json");
    std::fs::write(sidecar, meta)?;
    Ok(())
}

/// Writes a dense CSV grid, one line per row.
pub fn write_dense(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m.get(i, j));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parses a dense CSV grid; rows must be nonempty and rectangular.
pub fn parse_dense(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(k, l)| (k + 1, l)) {
        let mut row = Vec::new();
        for field in line.split(',') {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad value {field:?}: {e}")))?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    lineno,
                    format!("ragged row: {} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MmcError::invalid("dense file has no rows"));
    }
    let (n, m) = (rows.len(), rows[0].len());
    DenseMatrix::from_rows(n, m, rows.into_iter().flatten().collect())
}

/// Split parameters. Fraction mode draws `floor(frac * len)` entries
/// globally for train and validation; per-row mode draws exactly
/// `per_row = (k_train, k_val)` entries from every row that has any, erroring
/// on rows too small for both draws. The remainder goes to test.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub per_row: Option<(usize, usize)>,
    pub seed: u64,
}

/// Deterministically partitions the observation multiset into
/// `(train, val, test)` by occurrence; every input occurrence lands in
/// exactly one part.
pub fn split(
    obs: &ObservationSet,
    spec: &SplitSpec,
) -> Result<(ObservationSet, ObservationSet, ObservationSet)> {
    if obs.is_empty() {
        return Err(MmcError::invalid("split needs at least one observation"));
    }
    let mut rng = stream_rng(spec.seed, STREAM_SPLIT);
    let entries = obs.entries();
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();

    match spec.per_row {
        None => {
            if !(spec.train_frac > 0.0 && spec.val_frac > 0.0)
                || !(spec.train_frac + spec.val_frac <= 1.0)
            {
                return Err(MmcError::invalid(
                    "split fractions must be positive with sum at most 1",
                ));
            }
            let mut order: Vec<usize> = (0..entries.len()).collect();
            order.shuffle(&mut rng);
            let n_train = (spec.train_frac * entries.len() as f64).floor() as usize;
            let n_val = (spec.val_frac * entries.len() as f64).floor() as usize;
            for (pos, idx) in order.into_iter().enumerate() {
                let e = entries[idx];
                if pos < n_train {
                    train.push(e);
                } else if pos < n_train + n_val {
                    val.push(e);
                } else {
                    test.push(e);
                }
            }
        }
        Some((k_train, k_val)) => {
            if k_train == 0 || k_val == 0 {
                return Err(MmcError::invalid("per-row split counts must be >= 1"));
            }
            let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); obs.n()];
            for (idx, (i, _, _)) in entries.iter().enumerate() {
                by_row[*i].push(idx);
            }
            let short: Vec<usize> = by_row
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_empty() && v.len() < k_train + k_val)
                .map(|(i, _)| i)
                .collect();
            if !short.is_empty() {
                return Err(MmcError::invalid(format!(
                    "rows too small for a {k_train}+{k_val} per-row split: {short:?}"
                )));
            }
            for row in by_row.iter_mut() {
                if row.is_empty() {
                    continue;
                }
                row.shuffle(&mut rng);
                for (pos, idx) in row.iter().enumerate() {
                    let e = entries[*idx];
                    if pos < k_train {
                        train.push(e);
                    } else if pos < k_train + k_val {
                        val.push(e);
                    } else {
                        test.push(e);
                    }
                }
            }
        }
    }

    Ok((
        ObservationSet::new(obs.n(), obs.m(), train)?,
        ObservationSet::new(obs.n(), obs.m(), val)?,
        ObservationSet::new(obs.n(), obs.m(), test)?,
    ))
}
