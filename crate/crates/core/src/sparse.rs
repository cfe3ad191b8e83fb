//! Compressed sparse row matrices for real operators on a Fock basis.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Real sparse matrix in CSR layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    pub label: String,
    pub hermitian: bool,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Builds from (row, col, value) triplets; duplicates are summed in input order.
    pub fn from_triplets(label: impl Into<String>, dim: usize, hermitian: bool, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "triplet ({r},{c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut op = Self { label: label.into(), hermitian, dim, row_ptr, cols, vals };
        op.prune(0.0);
        op
    }

    pub fn zeros(label: impl Into<String>, dim: usize) -> Self {
        Self::from_triplets(label, dim, true, Vec::new())
    }

    pub fn identity(label: impl Into<String>, dim: usize) -> Self {
        Self::diagonal(label, (0..dim).map(|_| 1.0).collect())
    }

    pub fn diagonal(label: impl Into<String>, d: Vec<f64>) -> Self {
        let dim = d.len();
        let t = d.into_iter().enumerate().map(|(i, v)| (i, i, v)).collect();
        Self::from_triplets(label, dim, true, t)
    }

    /// Drops stored entries with |value| ≤ tol.
    fn prune(&mut self, tol: f64) {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k].abs() > tol {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of row r as (column, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    /// y = A x, optionally parallel over rows (results are identical either way).
    pub fn apply(&self, x: &[f64], parallel: bool) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let row = |r: usize| self.row(r).map(|(c, v)| v * x[c]).sum::<f64>();
        if parallel && self.dim > 2048 {
            (0..self.dim).into_par_iter().map(row).collect()
        } else {
            (0..self.dim).map(row).collect()
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn from_dense(label: impl Into<String>, m: &DMatrix<f64>, hermitian: bool, tol: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].abs() > tol {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(label, m.nrows(), hermitian, t)
    }

    pub fn transpose(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(format!("{}^T", self.label), self.dim, self.hermitian, t)
    }

    /// Largest |A - Aᵀ| entry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Largest |A + Aᵀ| entry.
    pub fn symmetric_part_max(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v + self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Σ cᵢ Aᵢ over operators of equal dimension.
    pub fn linear_combination(label: impl Into<String>, parts: &[(f64, &SparseOperator)]) -> Self {
        let dim = parts.first().map_or(0, |(_, a)| a.dim);
        let mut t = Vec::new();
        let mut hermitian = true;
        for (c, a) in parts {
            assert_eq!(a.dim, dim, "dimension mismatch in linear combination");
            hermitian &= a.hermitian;
            t.extend(a.triplets().into_iter().map(|(r, col, v)| (r, col, c * v)));
        }
        Self::from_triplets(label, dim, hermitian, t)
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// ⟨x, A y⟩.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.apply(y, false);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// Coordinate-list text: a header line `dim nnz`, then `row col value`.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::with_capacity(32 * self.nnz() + 32);
        writeln!(s, "{} {}", self.dim, self.nnz()).unwrap();
        for (r, c, v) in self.triplets() {
            writeln!(s, "{r} {c} {v:.16e}").unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_summed_and_sorted() {
        let a = SparseOperator::from_triplets("a", 3, false, vec![(2, 0, 1.0), (0, 1, 2.0), (2, 0, 0.5), (1, 1, 0.0)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(2, 0), 1.5);
        assert_eq!(a.apply(&[1.0, 1.0, 1.0], false), vec![2.0, 0.0, 1.5]);
        assert_eq!(a.transpose().get(0, 2), 1.5);
    }

    #[test]
    fn dense_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 3.0]);
        let a = SparseOperator::from_dense("m", &m, true, 0.0);
        assert_eq!(a.to_dense(), m);
        assert_eq!(a.asymmetry(), 0.0);
        assert!(a.to_coordinate_text().starts_with("2 4\n"));
    }
}
