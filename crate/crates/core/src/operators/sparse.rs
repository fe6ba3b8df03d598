use std::fmt::Write as _;

use super::LinearOperator;

/// Compressed-row matrix. Column indices are strictly increasing within each
/// row and no explicit zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());

        let mut it = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = it.next() {
            assert!(r < nrows && c < ncols, "entry ({r},{c}) outside {nrows}x{ncols}");
            while let Some(&(r2, c2, v2)) = it.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    it.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let trip = rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(nrows, ncols, trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
        self.col_indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
        match self.col_indices[a..b].binary_search(&c) {
            Ok(pos) => self.values[a + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let mut s = 0.0;
            for k in a..b {
                s += self.values[k] * x[self.col_indices[k]];
            }
            *yr = s;
        }
    }

    pub fn transpose(&self) -> Self {
        let trip = (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    /// `self·alpha + shift·I`
    pub fn scaled_shifted(&self, alpha: f64, shift: f64) -> Self {
        let mut trip: Vec<(usize, usize, f64)> = (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, alpha * v)))
            .collect();
        if shift != 0.0 {
            trip.extend((0..self.nrows.min(self.ncols)).map(|i| (i, i, shift)));
        }
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    /// Largest entrywise difference; matrices of different shape compare as infinite.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return f64::INFINITY;
        }
        let mut m = 0.0f64;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m = m.max((v - other.get(r, c)).abs());
            }
            for (c, v) in other.row(r) {
                m = m.max((v - self.get(r, c)).abs());
            }
        }
        m
    }

    /// Matrix Market coordinate format (1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz()).unwrap();
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v).unwrap();
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn check_invariants(&self) -> bool {
        self.row_offsets.windows(2).all(|w| w[0] <= w[1])
            && (0..self.nrows).all(|r| {
                let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
                self.col_indices[a..b].windows(2).all(|w| w[0] < w[1])
            })
            && self.values.iter().all(|v| *v != 0.0)
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y);
    }
}
