//! Minimal CSR sparse matrix, just what the truncated operators need:
//! deterministic assembly from triplets, matvec, matmul, scaled sums.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed in
    /// (row, col) order so assembly is deterministic.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if let (Some(&last_c), true) = (cols.last(), row_ptr[r + 1] > 0) {
                // Same row already open and same column: merge.
                if last_c == c && row_ptr[r + 1] == cols.len() {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] = cols.len();
        }
        // Rows with no entries keep the previous pointer.
        for r in 1..=nrows {
            if row_ptr[r] < row_ptr[r - 1] {
                row_ptr[r] = row_ptr[r - 1];
            }
        }
        Self { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.cols[lo..hi].binary_search(&col) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    /// Classic CSR product with a dense accumulator row.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut acc = vec![0.0f64; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = self.vals[k];
                let mid = self.cols[k];
                for kk in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    let c = other.cols[kk];
                    if acc[c] == 0.0 && !touched.contains(&c) {
                        touched.push(c);
                    }
                    acc[c] += a * other.vals[kk];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                cols.push(c);
                vals.push(acc[c]);
                acc[c] = 0.0;
            }
            row_ptr[r + 1] = cols.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    /// `self + factor * other`, pattern union.
    pub fn add_scaled(&self, other: &CsrMatrix, factor: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((r, self.cols[k], self.vals[k]));
            }
            for k in other.row_ptr[r]..other.row_ptr[r + 1] {
                triplets.push((r, other.cols[k], factor * other.vals[k]));
            }
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, triplets)
    }

    pub fn scale(&self, factor: f64) -> CsrMatrix {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= factor;
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                sums[self.cols[k]] += self.vals[k];
            }
        }
        sums
    }

    /// Largest absolute diagonal entry; the uniformization rate.
    pub fn max_abs_diag(&self) -> f64 {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                dense[(r, self.cols[k])] = self.vals[k];
            }
        }
        dense
    }

    pub fn from_dense(dense: &DMatrix<f64>, drop_below: f64) -> CsrMatrix {
        let mut triplets = Vec::new();
        for r in 0..dense.nrows() {
            for c in 0..dense.ncols() {
                let v = dense[(r, c)];
                if v.abs() > drop_below {
                    triplets.push((r, c, v));
                }
            }
        }
        CsrMatrix::from_triplets(dense.nrows(), dense.ncols(), triplets)
    }

    /// Iterate entries of one row as (col, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_assembly_merges_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn matvec_and_matmul_agree_with_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 2.0), (0, 2, 1.0), (1, 1, -1.0), (2, 0, 0.5), (2, 2, 3.0)],
        );
        let b = CsrMatrix::from_triplets(3, 3, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 1, -0.5)]);
        let prod = a.matmul(&b);
        let dense = a.to_dense() * b.to_dense();
        for r in 0..3 {
            for c in 0..3 {
                assert!((prod.get(r, c) - dense[(r, c)]).abs() < 1e-15);
            }
        }
        let x = [1.0, 2.0, 3.0];
        let y = a.matvec(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for r in 0..3 {
            assert!((y[r] - yd[r]).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_rows_and_boundary_duplicates() {
        // Rows 0 and 2 empty; duplicates at the first entry of a later row
        // must not merge into the previous row's tail.
        let m = CsrMatrix::from_triplets(
            4,
            3,
            vec![(1, 2, 1.0), (3, 2, 5.0), (3, 2, -2.0), (3, 0, 0.5)],
        );
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 1.0);
        assert_eq!(m.get(3, 2), 3.0);
        assert_eq!(m.get(3, 0), 0.5);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(2, 2), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![0.0, 1.0, 0.0, 3.5]);
    }

    #[test]
    fn add_scaled_and_sums() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 4.0), (1, 1, 1.0)]);
        let c = a.add_scaled(&b, 0.5);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 2.0);
        assert_eq!(c.get(1, 1), 1.5);
        assert_eq!(c.column_sums(), vec![1.0, 3.5]);
    }
}
