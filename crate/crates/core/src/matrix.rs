//! Dense row-major matrices, the pseudo-inverse, seeded randomness and the
//! `MAT1` file format.
//!
//! Every reduction here walks its indices in a fixed order so results are
//! bit-identical between runs, whatever the thread count.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rectangular matrix of `f64` stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            for r in 0..self.rows {
                write!(f, "\n  {:?}", self.row(r))?;
            }
        }
        Ok(())
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::InvalidDimensions {
                rows,
                cols,
                reason: "data length does not match shape",
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// All-zero matrix. Panics on a zero dimension.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        check_dims(rows, cols)?;
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidDimensions {
                rows,
                cols,
                reason: "columns have unequal length",
            });
        }
        let mut data = vec![0.0; rows * cols];
        for (c, col) in columns.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                data[r * cols + c] = v;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (r, &v) in values.iter().enumerate() {
            self.data[r * self.cols + c] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self · rhs`. Each output row is accumulated serially in index order,
    /// so the parallel split over rows does not change any bit.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        out.data
            .par_chunks_mut(n)
            .zip(self.data.par_chunks(self.cols))
            .for_each(|(out_row, lhs_row)| {
                for (p, &a) in lhs_row.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let rhs_row = &rhs.data[p * n..(p + 1) * n];
                    for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                        *o += a * b;
                    }
                }
            });
        Ok(out)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape("sub", rhs)?;
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        sum_sq(&self.data).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_same_shape(&self, op: &'static str, rhs: &DenseMatrix) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(())
    }

    /// Serializes to the `MAT1` byte layout: an ASCII header line
    /// `MAT1 <rows> <cols>\n` then little-endian `f64`s in row-major order.
    pub fn to_mat1_bytes(&self) -> Vec<u8> {
        let header = format!("MAT1 {} {}\n", self.rows, self.cols);
        let mut out = Vec::with_capacity(header.len() + 8 * self.data.len());
        out.extend_from_slice(header.as_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_mat1_reader(reader: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut header = Vec::new();
        reader
            .read_until(b'\n', &mut header)
            .map_err(|e| Error::MalformedHeader(format!("MAT1 header: {e}")))?;
        let text = std::str::from_utf8(&header)
            .map_err(|_| Error::MalformedHeader("MAT1 header is not ASCII".into()))?;
        if !text.ends_with('\n') {
            return Err(Error::MalformedHeader("MAT1 header missing newline".into()));
        }
        let mut parts = text.trim_end_matches('\n').split(' ');
        if parts.next() != Some("MAT1") {
            return Err(Error::MalformedHeader(format!(
                "bad MAT1 magic in {text:?}"
            )));
        }
        let mut dim = || -> Result<usize> {
            parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::MalformedHeader(format!("bad MAT1 dimensions in {text:?}")))
        };
        let rows = dim()?;
        let cols = dim()?;
        check_dims(rows, cols)?;
        let expected = rows * cols * 8;
        let mut payload = Vec::with_capacity(expected);
        reader
            .read_to_end(&mut payload)
            .map_err(|e| Error::MalformedHeader(format!("MAT1 payload: {e}")))?;
        if payload.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(rows, cols, data)
    }

    pub fn write_mat1(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_mat1_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_mat1(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_mat1_reader(f)
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimensions {
            rows,
            cols,
            reason: "both dimensions must be at least 1",
        });
    }
    Ok(())
}

/// Sum of squares, accumulated left to right.
pub(crate) fn sum_sq(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v * v)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// `‖A − B‖²_F / (rows·cols)`.
pub fn frobenius_mse(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    a.check_same_shape("frobenius_mse", b)?;
    let mut acc = 0.0;
    for (x, y) in a.data.iter().zip(&b.data) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc / (a.data.len() as f64))
}

/// Seeded random stream. ChaCha8 gives the same sequence on every platform.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// An independent stream derived from the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngState { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        Self::ALGORITHM
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

/// Matrix with i.i.d. entries uniform on `[lo, hi)`, filled row-major.
pub fn seeded_uniform_matrix(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut RngState,
) -> Result<DenseMatrix> {
    check_dims(rows, cols)?;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "uniform range requires finite lo < hi, got [{lo}, {hi})"
        )));
    }
    let data = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
    DenseMatrix::new(rows, cols, data)
}
