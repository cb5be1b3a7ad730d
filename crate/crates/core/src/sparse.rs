//! Compressed sparse row storage shared by transition matrices and policies.

use serde::{Deserialize, Serialize};

/// Row-compressed sparse matrix with column indices sorted ascending in each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists. Entries are sorted by column; duplicate
    /// columns are the caller's responsibility.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n_rows,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Same sparsity pattern as `self`, new values (one per stored entry).
    pub fn with_values(&self, vals: Vec<f64>) -> Self {
        assert_eq!(vals.len(), self.vals.len());
        CsrMatrix {
            n_rows: self.n_rows,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Range of storage indices belonging to row `r`.
    #[inline]
    pub fn row_range(&self, r: usize) -> std::ops::Range<usize> {
        self.row_ptr[r]..self.row_ptr[r + 1]
    }

    #[inline]
    pub fn row_cols(&self, r: usize) -> &[usize] {
        &self.cols[self.row_range(r)]
    }

    #[inline]
    pub fn row_vals(&self, r: usize) -> &[f64] {
        &self.vals[self.row_range(r)]
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_cols(r)
            .iter()
            .copied()
            .zip(self.row_vals(r).iter().copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// Storage index of entry (r, c), if present.
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let range = self.row_range(r);
        self.cols[range.clone()]
            .binary_search(&c)
            .ok()
            .map(|i| range.start + i)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.find(r, c).map_or(0.0, |i| self.vals[i])
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row_vals(r).iter().sum()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_sorted_and_findable() {
        let m = CsrMatrix::from_rows(vec![vec![(2, 0.5), (0, 0.5)], vec![(1, 1.0)], vec![]]);
        assert_eq!(m.row_cols(0), &[0, 2]);
        assert_eq!(m.get(0, 2), 0.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.find(1, 1), Some(2));
        assert_eq!(m.row_range(2), 3..3);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 4.0]), vec![2.5, 2.0, 0.0]);
    }
}
