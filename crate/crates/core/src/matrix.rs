//! Square nonnegative weight matrices, permutations, seeded generation and
//! the three on-disk matrix formats (dense text, CSV, JSON).
//!
//! Dense text is the canonical format:
//!
//! ```text
//! 2
//! 1 2
//! 3 4
//! ```
//!
//! The first line holds `n`, followed by `n` rows of `n` whitespace-separated
//! reals. CSV is `n` comma-separated rows without a header, and JSON is
//! `{"n": 2, "rows": [[1, 2], [3, 4]]}`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `n x n` matrix with nonnegative finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    /// Builds a matrix from row-major data, checking shape and sign.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Shape("matrix dimension must be positive".into()));
        }
        if data.len() != n * n {
            return Err(Error::Shape(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        for (idx, &w) in data.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::Domain(format!(
                    "entry ({}, {}) is not finite",
                    idx / n,
                    idx % n
                )));
            }
            if w < 0.0 {
                return Err(Error::Domain(format!(
                    "entry ({}, {}) = {w} is negative",
                    idx / n,
                    idx % n
                )));
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Shape(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        Self::from_vec(n, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self::from_fn(n, |_, _| value)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// Builds a matrix from a generator. Panics if the generator produces a
    /// negative or non-finite value.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::from_vec(n, data).expect("generator produced an invalid matrix")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    /// Multiplies every entry by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_vec(self.n, self.data.iter().map(|w| w * c).collect())
    }

    /// Row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &Permutation) -> Self {
        assert_eq!(perm.len(), self.n);
        Self::from_fn(self.n, |i, j| self.get(perm.get(i), j))
    }

    /// Column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_cols(&self, perm: &Permutation) -> Self {
        assert_eq!(perm.len(), self.n);
        Self::from_fn(self.n, |i, j| self.get(i, perm.get(j)))
    }

    /// Replaces every entry below `floor` with `floor`.
    pub fn clamped_below(&self, floor: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&w| w.max(floor)).collect(),
        }
    }
}

/// A bijection on `{0, ..., n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &p in &mapping {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Domain(format!(
                    "{mapping:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Self(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Uniform draw from S_n (Fisher-Yates).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        mapping.shuffle(rng);
        Self(mapping)
    }

    /// Ranks of `keys` in ascending order, ties broken by index: `result[i]` is
    /// the position of item `i` in the sorted order.
    pub fn ranking_by<T>(keys: &[T], mut cmp: impl FnMut(&T, &T) -> std::cmp::Ordering) -> Self {
        let mut order: Vec<usize> = (0..keys.len()).collect();
        // stable sort keeps index order among equal keys
        order.sort_by(|&a, &b| cmp(&keys[a], &keys[b]));
        let mut rank = vec![0; keys.len()];
        for (pos, &item) in order.iter().enumerate() {
            rank[item] = pos;
        }
        Self(rank)
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Self(inv)
    }
}

pub const CHACHA8: &str = "chacha8";

/// A reproducible random stream: the same seed and algorithm always yield the same draws.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub algorithm: String,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            algorithm: CHACHA8.to_string(),
        }
    }

    pub fn rng(&self) -> Result<ChaCha8Rng> {
        match self.algorithm.as_str() {
            CHACHA8 => Ok(ChaCha8Rng::seed_from_u64(self.seed)),
            other => Err(Error::Domain(format!(
                "unsupported rng algorithm {other:?}"
            ))),
        }
    }

    /// Derives an independent stream for work item `index`.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
            algorithm: self.algorithm.clone(),
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Matrix with i.i.d. entries uniform on `[lo, hi]`.
pub fn random_uniform_matrix(n: usize, lo: f64, hi: f64, spec: &RngSpec) -> Result<SquareMatrix> {
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
        return Err(Error::Domain(format!(
            "need 0 <= lo <= hi, got lo = {lo}, hi = {hi}"
        )));
    }
    if n == 0 {
        return Err(Error::Shape("matrix dimension must be positive".into()));
    }
    let mut rng = spec.rng()?;
    let data = (0..n * n).map(|_| rng.random_range(lo..=hi)).collect();
    SquareMatrix::from_vec(n, data)
}

pub fn random_permutation(n: usize, spec: &RngSpec) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::Shape("permutation length must be positive".into()));
    }
    Ok(Permutation::random(n, &mut spec.rng()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixFormat {
    #[default]
    DenseText,
    Csv,
    Json,
}

impl MatrixFormat {
    /// Guesses the format from a file extension, defaulting to dense text.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::Csv,
            Some("json") => Self::Json,
            _ => Self::DenseText,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-text" | "dense" | "txt" => Ok(Self::DenseText),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Parse(format!("unknown matrix format {other:?}"))),
        }
    }
}

impl fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DenseText => "dense-text",
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct JsonMatrix {
    n: usize,
    rows: Vec<Vec<f64>>,
}

fn parse_real(token: &str, line: usize) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: {token:?} is not a number")))
}

pub fn parse_matrix(bytes: &[u8], format: MatrixFormat) -> Result<SquareMatrix> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    match format {
        MatrixFormat::DenseText => parse_dense(text),
        MatrixFormat::Csv => parse_csv(text),
        MatrixFormat::Json => {
            let m: JsonMatrix =
                serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
            if m.rows.len() != m.n {
                return Err(Error::Shape(format!(
                    "declared n = {} but found {} rows",
                    m.n,
                    m.rows.len()
                )));
            }
            SquareMatrix::from_rows(&m.rows)
        }
    }
}

fn parse_dense(text: &str) -> Result<SquareMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty input".into()))?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("header {header:?} is not a dimension")))?;
    let mut rows = Vec::with_capacity(n);
    for (lineno, line) in lines {
        let row = line
            .split_whitespace()
            .map(|t| parse_real(t, lineno + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::Shape(format!(
            "header declares {n} rows, found {}",
            rows.len()
        )));
    }
    SquareMatrix::from_rows(&rows)
}

fn parse_csv(text: &str) -> Result<SquareMatrix> {
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(lineno, line)| {
            line.split(',')
                .map(|t| parse_real(t, lineno + 1))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Parse("empty input".into()));
    }
    SquareMatrix::from_rows(&rows)
}

/// Writes `m` so that `parse_matrix` recovers it bit for bit.
pub fn serialize_matrix(m: &SquareMatrix, format: MatrixFormat) -> Vec<u8> {
    // `{}` on f64 prints the shortest string that parses back to the same value.
    let join = |row: &[f64], sep: &str| {
        row.iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(sep)
    };
    let mut out = String::new();
    match format {
        MatrixFormat::DenseText => {
            writeln!(out, "{}", m.n()).unwrap();
            for row in m.rows() {
                writeln!(out, "{}", join(row, " ")).unwrap();
            }
        }
        MatrixFormat::Csv => {
            for row in m.rows() {
                writeln!(out, "{}", join(row, ",")).unwrap();
            }
        }
        MatrixFormat::Json => {
            let doc = JsonMatrix {
                n: m.n(),
                rows: m.rows().map(<[f64]>::to_vec).collect(),
            };
            out = serde_json::to_string(&doc).expect("finite matrix serializes");
            out.push('\n');
        }
    }
    out.into_bytes()
}
