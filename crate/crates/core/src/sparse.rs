//! Compressed-sparse-row matrices of non-negative path counts.
//!
//! Entries are `u64`; every product is checked and overflow is reported as
//! [`Error::Overflow`] instead of wrapping. Zero entries are never stored.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseCountMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<u64>,
}

impl SparseCountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseCountMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseCountMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1; n],
        }
    }

    /// Builds a matrix from `(row, col, count)` triplets. Duplicate coordinates
    /// are summed and zero counts dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self> {
        let mut items: Vec<(usize, usize, u64)> = triplets.into_iter().collect();
        for &(r, c, _) in &items {
            if r >= rows || c >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
        }
        items.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(items.len());
        let mut values: Vec<u64> = Vec::with_capacity(items.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in items {
            if v == 0 {
                continue;
            }
            if last == Some((r, c)) {
                let slot = values.last_mut().expect("previous entry");
                *slot = slot.checked_add(v).ok_or(Error::Overflow)?;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(SparseCountMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(dense: &[Vec<u64>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (r, row) in dense.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch("ragged dense matrix".into()));
            }
            for (c, &v) in row.iter().enumerate() {
                trip.push((r, c, v));
            }
        }
        Self::from_triplets(rows, cols, trip)
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let mut out = vec![vec![0u64; self.cols]; self.rows];
        for (r, c, v) in self.iter() {
            out[r][c] = v;
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(column, count)` pairs of one row, sorted by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Entry lookup by binary search within the row; zero when absent.
    pub fn get(&self, r: usize, c: usize) -> u64 {
        if r >= self.rows {
            return 0;
        }
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0u64; self.nnz()];
        // Row-major traversal keeps the new column indices sorted per row.
        for (r, c, v) in self.iter() {
            let slot = next[c];
            indices[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        SparseCountMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// Replaces every stored count with 1.
    pub fn binarized(&self) -> Self {
        SparseCountMatrix {
            values: vec![1; self.values.len()],
            ..self.clone()
        }
    }

    /// Exact integer product `self * other` (Gustavson's row-wise algorithm).
    pub fn spmm(&self, other: &SparseCountMatrix) -> Result<SparseCountMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![0u64; other.cols];
        let mut touched = vec![false; other.cols];
        let mut cols_in_row: Vec<usize> = Vec::new();

        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();

        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    let prod = a.checked_mul(b).ok_or(Error::Overflow)?;
                    acc[c] = acc[c].checked_add(prod).ok_or(Error::Overflow)?;
                    if !touched[c] {
                        touched[c] = true;
                        cols_in_row.push(c);
                    }
                }
            }
            cols_in_row.sort_unstable();
            for &c in &cols_in_row {
                // Counts are non-negative, so a touched entry is always > 0.
                indices.push(c);
                values.push(acc[c]);
                acc[c] = 0;
                touched[c] = false;
            }
            cols_in_row.clear();
            indptr.push(indices.len());
        }
        Ok(SparseCountMatrix {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Checks the structural invariants: sorted unique columns per row,
    /// in-range indices, strictly positive counts.
    pub fn check_invariants(&self) -> bool {
        if self.indptr.len() != self.rows + 1 || self.indptr[self.rows] != self.values.len() {
            return false;
        }
        (0..self.rows).all(|r| {
            let cols = &self.indices[self.indptr[r]..self.indptr[r + 1]];
            cols.windows(2).all(|w| w[0] < w[1]) && cols.iter().all(|&c| c < self.cols)
        }) && self.values.iter().all(|&v| v > 0)
    }
}
