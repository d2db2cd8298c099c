//! LIBSVM ingestion, row normalization and synthetic logistic instances.
//!
//! Rows are kept sparse with 1-based feature indices, exactly as they appear
//! in the file, and are materialized dense when a [`LogisticProblem`] is built.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::kernels;
use crate::oracle::{sigmoid, LogisticProblem, OracleError};

/// Rows whose norm is within this distance of 1 are left untouched by
/// [`normalize_rows`].
pub const UNIT_NORM_TOL: f64 = 1e-14;

/// Shape, seed and label noise of the synthetic fixture used by the test suites.
pub const FIXTURE_N: usize = 500;
pub const FIXTURE_D: usize = 50;
pub const FIXTURE_SEED: u64 = 7;
pub const FIXTURE_SEPARATION: f64 = 3.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn parse_err(line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse { line, message: message.into() }
}

/// How a zero label is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroLabel {
    /// Zero labels are an error.
    #[default]
    Reject,
    /// `{0, 1}` files: zero becomes −1.
    AsNegative,
}

/// One example: `(index, value)` pairs with strictly increasing 1-based indices.
pub type SparseRow = Vec<(usize, f64)>;

/// Binary-labelled sparse dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
}

impl RawDataset {
    /// Validates index order, finiteness and labels in `{−1, +1}`.
    /// `dim` must cover every index.
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, dim: usize) -> Result<Self, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::Invalid(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        for (i, (row, &b)) in rows.iter().zip(&labels).enumerate() {
            if b != 1.0 && b != -1.0 {
                return Err(DataError::Invalid(format!("row {i}: label {b} is not ±1")));
            }
            let mut prev = 0;
            for &(j, v) in row {
                if j <= prev || j > dim {
                    return Err(DataError::Invalid(format!("row {i}: index {j} out of order or above {dim}")));
                }
                if !v.is_finite() {
                    return Err(DataError::Invalid(format!("row {i}: non-finite value at index {j}")));
                }
                prev = j;
            }
        }
        Ok(Self { rows, labels, dim })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Row-major `n × d` matrix with zero padding.
    pub fn dense_rows(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n() * self.dim];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[i * self.dim + j - 1] = v;
            }
        }
        out
    }

    /// Logistic loss on this data with ℓ2 weight `mu`.
    pub fn to_problem(&self, mu: f64) -> Result<LogisticProblem, DataError> {
        Ok(LogisticProblem::new(self.dense_rows(), self.labels.clone(), self.dim, mu)?)
    }
}

/// Parses LIBSVM text: `label index:value ...` per line, `#` starts a comment,
/// blank lines are skipped. Labels are mapped to ±1 by sign.
pub fn parse_libsvm<R: BufRead>(reader: R, zero: ZeroLabel) -> Result<RawDataset, DataError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(lineno, format!("bad label {label_tok:?}")))?;
        let label = if label > 0.0 {
            1.0
        } else if label < 0.0 || zero == ZeroLabel::AsNegative {
            -1.0
        } else {
            return Err(parse_err(lineno, "zero label (enable the {0,1} remap to accept it)"));
        };

        let mut row = SparseRow::new();
        for tok in tokens {
            let (idx, val) =
                tok.split_once(':').ok_or_else(|| parse_err(lineno, format!("expected index:value, got {tok:?}")))?;
            let j: usize = idx
                .parse()
                .ok()
                .filter(|&j| j >= 1)
                .ok_or_else(|| parse_err(lineno, format!("bad feature index {idx:?}")))?;
            let v: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("bad feature value {val:?}")))?;
            if let Some(&(prev, _)) = row.last() {
                if j <= prev {
                    return Err(parse_err(lineno, format!("index {j} does not increase after {prev}")));
                }
            }
            row.push((j, v));
        }
        if let Some(&(j, _)) = row.last() {
            dim = dim.max(j);
        }
        rows.push(row);
        labels.push(label);
    }
    Ok(RawDataset { rows, labels, dim })
}

/// Reads a LIBSVM file, decompressing it when the name ends in `.gz`.
pub fn read_libsvm(path: &Path, zero: ZeroLabel) -> Result<RawDataset, DataError> {
    let file = File::open(path)?;
    let reader: Box<dyn Read> =
        if path.extension().is_some_and(|e| e == "gz") { Box::new(GzDecoder::new(file)) } else { Box::new(file) };
    parse_libsvm(BufReader::new(reader), zero)
}

/// Writes LIBSVM text that [`parse_libsvm`] reads back exactly.
pub fn serialize<W: Write>(data: &RawDataset, mut out: W) -> io::Result<()> {
    for (row, &b) in data.rows.iter().zip(&data.labels) {
        out.write_all(if b > 0.0 { b"+1" } else { b"-1" })?;
        for &(j, v) in row {
            write!(out, " {j}:{v:?}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Scales every row to unit Euclidean norm and drops all-zero rows with a
/// warning. Rows already at unit norm are kept bit for bit, so the operation
/// is idempotent.
pub fn normalize_rows(data: &RawDataset) -> RawDataset {
    let mut rows = Vec::with_capacity(data.n());
    let mut labels = Vec::with_capacity(data.n());
    let mut dropped = 0;
    for (row, &b) in data.rows.iter().zip(&data.labels) {
        let norm = row.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            dropped += 1;
            continue;
        }
        if (norm - 1.0).abs() <= UNIT_NORM_TOL {
            rows.push(row.clone());
        } else {
            rows.push(row.iter().map(|&(j, v)| (j, v / norm)).collect());
        }
        labels.push(b);
    }
    if dropped > 0 {
        log::warn!("normalize_rows: dropped {dropped} all-zero row(s)");
    }
    RawDataset { rows, labels, dim: data.dim }
}

/// Gaussian features with a planted unit hyperplane `w*`, rows normalized.
///
/// Labels are `+1` with probability `σ(separation·⟨a, w*⟩)`; an infinite
/// separation gives noiseless labels `sign⟨a, w*⟩` (ties go to `+1`), so the
/// data are linearly separable.
pub fn synth_dataset(n: usize, d: usize, seed: u64, separation: f64) -> Result<RawDataset, DataError> {
    if n == 0 || d == 0 {
        return Err(DataError::Invalid(format!("need n, d >= 1, got n = {n}, d = {d}")));
    }
    if !(separation >= 0.0) {
        return Err(DataError::Invalid(format!("separation must be >= 0, got {separation}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |k: usize| -> Vec<f64> { (0..k).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let mut w = gauss(d);
    let wn = kernels::norm(&w);
    kernels::scale(1.0 / wn, &mut w);

    let mut rows = Vec::with_capacity(n);
    let mut margins = Vec::with_capacity(n);
    for _ in 0..n {
        let mut a = gauss(d);
        let an = kernels::norm(&a);
        kernels::scale(1.0 / an, &mut a);
        margins.push(kernels::dot(&a, &w));
        rows.push(a.into_iter().enumerate().map(|(j, v)| (j + 1, v)).collect());
    }
    let labels = margins
        .iter()
        .map(|&z| {
            let positive = if separation.is_infinite() {
                z >= 0.0
            } else {
                let u: f64 = rand::Rng::random(&mut rng);
                u < sigmoid(separation * z)
            };
            if positive {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    RawDataset::new(rows, labels, d)
}

/// [`synth_dataset`] wrapped as an unregularized logistic problem.
pub fn synth_logistic(n: usize, d: usize, seed: u64, separation: f64) -> Result<LogisticProblem, DataError> {
    synth_dataset(n, d, seed, separation)?.to_problem(0.0)
}

/// The `500 × 50` fixture with seed 7 and noisy labels. The unregularized
/// loss attains its minimum.
pub fn fixture_dataset() -> RawDataset {
    synth_dataset(FIXTURE_N, FIXTURE_D, FIXTURE_SEED, FIXTURE_SEPARATION).expect("fixture parameters are valid")
}

/// Same features as [`fixture_dataset`] with noiseless labels: linearly
/// separable, so the unregularized loss has infimum 0 and no minimizer.
pub fn separable_fixture_dataset() -> RawDataset {
    synth_dataset(FIXTURE_N, FIXTURE_D, FIXTURE_SEED, f64::INFINITY).expect("fixture parameters are valid")
}
