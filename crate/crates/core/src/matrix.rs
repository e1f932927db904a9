//! The squared dissimilarity matrix every other module works from.
//!
//! Entry `(i, j)` is the squared dissimilarity between points `i` and `j`.
//! For points in a Euclidean space that is `‖p_i − p_j‖²`, but any symmetric
//! matrix with a zero diagonal is accepted, negative entries included.

use std::ops::Index;

use crate::error::{Error, Result};

/// Default relative tolerance used by [`SquaredDissimilarityMatrix::validate`].
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-9;

/// A validated, symmetric, zero-diagonal `n × n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDissimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
    scale: f64,
    has_negative_entries: bool,
}

impl SquaredDissimilarityMatrix {
    /// Validates a raw grid.
    ///
    /// `tolerance` is absolute; `None` means `1e-9 · max|entry|`. Pairs whose
    /// asymmetry is within tolerance are averaged, and diagonal entries within
    /// tolerance of zero are set to exactly zero.
    pub fn validate<R: AsRef<[f64]>>(raw: &[R], tolerance: Option<f64>) -> Result<Self> {
        let n = raw.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in raw.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::NonSquare {
                    row: i,
                    len: row.len(),
                    expected: n,
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteEntry { i, j });
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(n, entries, tolerance)
    }

    /// Same as [`validate`](Self::validate) for an already flattened grid.
    pub fn from_row_major(n: usize, mut entries: Vec<f64>, tolerance: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if entries.len() != n * n {
            return Err(Error::NonSquare {
                row: entries.len() / n,
                len: entries.len() % n,
                expected: n,
            });
        }
        if let Some(k) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { i: k / n, j: k % n });
        }
        let raw_scale = max_abs(&entries);
        let tolerance = tolerance.unwrap_or(DEFAULT_RELATIVE_TOLERANCE * raw_scale);

        let mut worst: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let dev = (entries[i * n + j] - entries[j * n + i]).abs();
                if dev > tolerance && worst.is_none_or(|(_, _, w)| dev > w) {
                    worst = Some((i, j, dev));
                }
            }
        }
        if let Some((i, j, deviation)) = worst {
            return Err(Error::AsymmetryExceedsTolerance {
                i,
                j,
                deviation,
                tolerance,
            });
        }

        let mut worst_diag: Option<(usize, f64)> = None;
        for i in 0..n {
            let v = entries[i * n + i];
            if v.abs() > tolerance && worst_diag.is_none_or(|(_, w)| v.abs() > w.abs()) {
                worst_diag = Some((i, v));
            }
        }
        if let Some((i, value)) = worst_diag {
            return Err(Error::NonzeroDiagonal {
                i,
                value,
                tolerance,
            });
        }

        for i in 0..n {
            entries[i * n + i] = 0.0;
            for j in i + 1..n {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                if a != b {
                    let mean = 0.5 * (a + b);
                    entries[i * n + j] = mean;
                    entries[j * n + i] = mean;
                }
            }
        }
        Ok(Self::from_entries_unchecked(n, entries))
    }

    /// Squared Euclidean distances between the given points.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let n = points.len();
        let first = points.first().ok_or(Error::EmptyInput)?;
        let dim = first.as_ref().len();
        for (index, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteEntry { i: index, j: index });
            }
        }
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = squared_euclidean(points[i].as_ref(), points[j].as_ref());
                entries[i * n + j] = d;
                entries[j * n + i] = d;
            }
        }
        if let Some(k) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { i: k / n, j: k % n });
        }
        Ok(Self::from_entries_unchecked(n, entries))
    }

    /// Wraps entries already known to be symmetric, finite and zero on the
    /// diagonal.
    pub(crate) fn from_entries_unchecked(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        let scale = max_abs(&entries);
        let has_negative_entries = entries.iter().any(|&v| v < 0.0);
        Self {
            n,
            entries,
            scale,
            has_negative_entries,
        }
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest absolute entry. Zero only for the all-zero matrix.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn has_negative_entries(&self) -> bool {
        self.has_negative_entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n.max(1))
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Sum of all entries.
    pub fn grand_sum(&self) -> f64 {
        self.rows().map(|r| r.iter().sum::<f64>()).sum()
    }

    /// Copy with rows and columns reordered so that new index `k` is old
    /// index `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: order.len(),
            });
        }
        let mut seen = vec![false; self.n];
        for &o in order {
            if o >= self.n || std::mem::replace(&mut seen[o], true) {
                return Err(Error::IndexOutOfRange {
                    index: o,
                    len: self.n,
                });
            }
        }
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for &oi in order {
            entries.extend(order.iter().map(|&oj| self.get(oi, oj)));
        }
        Ok(Self::from_entries_unchecked(n, entries))
    }
}

impl Index<(usize, usize)> for SquaredDissimilarityMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.n + j]
    }
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}
