//! Compressed sparse row storage for the symmetric matrices of the library.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Square sparse matrix in CSR form. Assembly keeps it symmetric; the
/// invariant is checked by `symmetry_defect` in tests rather than enforced
/// per entry.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    /// Triplets are sorted, so assembly order does not change the result.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &entries {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_counts[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_counts[i + 1] += row_counts[i];
        }
        CsrMatrix {
            n,
            row_ptr: row_counts,
            col_idx,
            values,
        }
    }

    /// Dense constructor for small test systems; zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>]) -> CsrMatrix {
        let n = rows.len();
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(n, &triplets)
    }

    pub fn identity(n: usize) -> CsrMatrix {
        let triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        CsrMatrix::from_triplets(n, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let start = self.row_ptr[i];
        let end = self.row_ptr[i + 1];
        self.col_idx[start..end]
            .iter()
            .copied()
            .zip(self.values[start..end].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `alpha * self + beta * other`, merging sparsity patterns.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        debug_assert_eq!(self.n, other.n);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                triplets.push((i, j, alpha * v));
            }
            for (j, v) in other.row(i) {
                triplets.push((i, j, beta * v));
            }
        }
        CsrMatrix::from_triplets(self.n, &triplets)
    }

    /// Symmetric elimination of the flagged dofs: rows and columns zeroed,
    /// unit diagonal. Valid for homogeneous constraints, which is all the
    /// library imposes on the boundary.
    pub fn eliminate(&self, constrained: &[bool]) -> CsrMatrix {
        debug_assert_eq!(constrained.len(), self.n);
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            if constrained[i] {
                triplets.push((i, i, 1.0));
                continue;
            }
            for (j, v) in self.row(i) {
                if !constrained[j] {
                    triplets.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(self.n, &triplets)
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max(math::abs(v - self.get(j, i)));
            }
        }
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0), (0, 1, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 1), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.symmetry_defect(), 0.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = CsrMatrix::from_dense(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ]);
        let y = a.apply(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![0.0, 0.0, 4.0]);
    }

    #[test]
    fn eliminate_keeps_unit_diagonal() {
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let b = a.eliminate(&[true, false]);
        assert_eq!(b.get(0, 0), 1.0);
        assert_eq!(b.get(0, 1), 0.0);
        assert_eq!(b.get(1, 0), 0.0);
        assert_eq!(b.get(1, 1), 3.0);
    }

    #[test]
    fn add_scaled_merges_patterns() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = CsrMatrix::from_dense(&[vec![0.0, 2.0], vec![2.0, 0.0]]);
        let c = a.add_scaled(3.0, &b, 0.5);
        assert_eq!(c.get(0, 0), 3.0);
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.get(1, 0), 1.0);
    }

    #[test]
    fn empty_rows_are_fine() {
        let a = CsrMatrix::from_triplets(3, &[(2, 2, 5.0)]);
        assert_eq!(a.apply(&[1.0, 1.0, 1.0]), vec![0.0, 0.0, 5.0]);
    }
}
