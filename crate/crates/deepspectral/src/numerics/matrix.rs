use std::cell::RefCell;

thread_local! {
    static ALLOC_LOG: RefCell<Option<Vec<(usize, usize)>>> = const { RefCell::new(None) };
}

fn note_alloc(rows: usize, cols: usize) {
    ALLOC_LOG.with(|log| {
        if let Some(entries) = log.borrow_mut().as_mut() {
            entries.push((rows, cols));
        }
    });
}

/// Runs `f` while recording the shape of every matrix allocated on this
/// thread. Used by complexity tests to assert that a code path never
/// materializes, say, an N x N pairwise matrix.
pub fn probe_allocations<R>(f: impl FnOnce() -> R) -> (R, Vec<(usize, usize)>) {
    ALLOC_LOG.with(|log| *log.borrow_mut() = Some(Vec::new()));
    let result = f();
    let entries = ALLOC_LOG.with(|log| log.borrow_mut().take()).unwrap_or_default();
    (result, entries)
}

/// Dense row-major matrix of 64-bit reals. The universal numeric carrier:
/// datasets, embeddings, affinity graphs, weights, and rotations all live in
/// one of these.
///
/// Shape mismatches in matrix arithmetic are programming errors and panic;
/// domain-level validation (symmetry, stochasticity, ...) happens in the
/// operations that own the contract and returns `Error` instead.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        note_alloc(rows, cols);
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match shape {}x{}",
            data.len(),
            rows,
            cols
        );
        note_alloc(rows, cols);
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "cannot build a matrix from zero rows");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows in matrix literal");
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_col(&mut self, c: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (r, &v) in values.iter().enumerate() {
            self.set(r, c, v);
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Gathers the given rows into a new matrix, in the order supplied.
    pub fn take_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// `self * rhs`. Row-major ikj loop: the inner accumulation order over k
    /// is fixed, so results are reproducible across runs and thread counts.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let n = rhs.cols;
        let mut out = Matrix::zeros(self.rows, n);
        for i in 0..self.rows {
            let arow = self.row(i);
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue; // relu embeddings are often half zeros
                }
                let brow = &rhs.data[k * n..(k + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn matmul_tn(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, rhs.rows,
            "matmul_tn shape mismatch: ({}x{})^T * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let n = rhs.cols;
        let mut out = Matrix::zeros(self.cols, n);
        for i in 0..self.rows {
            let arow = self.row(i);
            let brow = &rhs.data[i * n..(i + 1) * n];
            for (k, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[k * n..(k + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    /// `self * rhs^T` without materializing the transpose.
    pub fn matmul_nt(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.cols,
            "matmul_nt shape mismatch: {}x{} * ({}x{})^T",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..rhs.rows {
                let brow = rhs.row(j);
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += arow[k] * brow[k];
                }
                out.data[i * rhs.rows + j] = acc;
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Elementwise `self - rhs`.
    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let data = self.data.iter().map(|a| a * s).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, &v) in self.row(i).iter().enumerate() {
                sums[j] += v;
            }
        }
        sums
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "trace of a non-square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_hand_case() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
    }

    #[test]
    fn transpose_variants_agree_with_explicit_transpose() {
        let a = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.5 - 2.0);
        let b = Matrix::from_fn(4, 5, |i, j| (i as f64 - j as f64) * 0.25);
        let tn = a.matmul_tn(&b);
        let explicit = a.transpose().matmul(&b);
        assert_eq!(tn.shape(), (3, 5));
        for i in 0..3 {
            for j in 0..5 {
                assert!((tn.get(i, j) - explicit.get(i, j)).abs() < 1e-12);
            }
        }

        let c = Matrix::from_fn(2, 3, |i, j| (i + j) as f64);
        let d = Matrix::from_fn(4, 3, |i, j| (i * j) as f64 + 1.0);
        let nt = c.matmul_nt(&d);
        let explicit = c.matmul(&d.transpose());
        assert_eq!(nt.shape(), (2, 4));
        for i in 0..2 {
            for j in 0..4 {
                assert!((nt.get(i, j) - explicit.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_is_matmul_neutral() {
        let a = Matrix::from_fn(3, 3, |i, j| (i * 7 + j) as f64 * 0.3);
        let i3 = Matrix::identity(3);
        assert_eq!(a.matmul(&i3), a);
        assert_eq!(i3.matmul(&a), a);
    }

    #[test]
    fn take_rows_gathers_in_order() {
        let a = Matrix::from_fn(4, 2, |i, j| (10 * i + j) as f64);
        let picked = a.take_rows(&[2, 0, 2]);
        assert_eq!(picked.row(0), &[20.0, 21.0]);
        assert_eq!(picked.row(1), &[0.0, 1.0]);
        assert_eq!(picked.row(2), &[20.0, 21.0]);
    }

    #[test]
    fn probe_records_allocations_only_inside_scope() {
        let _outside = Matrix::zeros(9, 9);
        let (_, log) = probe_allocations(|| {
            let a = Matrix::zeros(3, 4);
            let b = Matrix::zeros(4, 2);
            a.matmul(&b)
        });
        assert!(log.contains(&(3, 4)));
        assert!(log.contains(&(4, 2)));
        assert!(log.contains(&(3, 2)));
        assert!(!log.contains(&(9, 9)));
    }

    #[test]
    #[should_panic(expected = "matmul shape mismatch")]
    fn matmul_rejects_mismatched_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let _ = a.matmul(&b);
    }
}
