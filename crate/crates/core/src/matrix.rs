//! Minimal dense row-major matrix used by the training engine.
//!
//! This is not a general linear-algebra library; it provides exactly the
//! kernels the classifier needs, written so that the floating-point
//! reduction order is fixed and results are reproducible run to run.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major dense matrix of finite f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Row count above which row-parallel kernels split the work. Each row is
/// produced independently and written to its own slice, so the result does
/// not depend on the thread schedule.
const PAR_ROW_THRESHOLD: usize = 512;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row slices; rows must all share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Input(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// New matrix holding the given rows of `self`, in the given order.
    pub fn gather_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// `self (n x k) * rhs (k x m) -> (n x m)`.
    ///
    /// Accumulation order over `k` is fixed per output row; large inputs are
    /// split across rows only, keeping the result thread-count independent.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        let m = rhs.cols;
        let mul_row = |a_row: &[f64], out_row: &mut [f64]| {
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * m..(k + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        };
        if self.rows >= PAR_ROW_THRESHOLD {
            self.data
                .par_chunks(self.cols)
                .zip(out.data.par_chunks_mut(m))
                .for_each(|(a_row, out_row)| mul_row(a_row, out_row));
        } else {
            for (a_row, out_row) in self.data.chunks(self.cols).zip(out.data.chunks_mut(m)) {
                mul_row(a_row, out_row);
            }
        }
        out
    }

    /// Computes `self.transpose() * rhs` without materializing the
    /// transpose, where `self` is (b x n) and `rhs` is (b x m),
    /// yielding (n x m).
    ///
    /// The reduction over the batch dimension runs in a fixed sequential
    /// order so gradients are bit-reproducible.
    pub fn transpose_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, rhs.rows,
            "transpose_matmul shape mismatch: {}x{} vs {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        let m = rhs.cols;
        for b in 0..self.rows {
            let a_row = self.row(b);
            let r_row = rhs.row(b);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * m..(i + 1) * m];
                for (o, &r) in out_row.iter_mut().zip(r_row) {
                    *o += a * r;
                }
            }
        }
        out
    }

    /// `self (n x m) * rhs^T` where `rhs` is (k x m), yielding (n x k).
    pub fn matmul_transpose(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.cols,
            "matmul_transpose shape mismatch: {}x{} vs {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        let k = rhs.rows;
        let mul_row = |a_row: &[f64], out_row: &mut [f64]| {
            for (j, out) in out_row.iter_mut().enumerate().take(k) {
                let r_row = &rhs.data[j * rhs.cols..(j + 1) * rhs.cols];
                let mut acc = 0.0;
                for (&a, &r) in a_row.iter().zip(r_row) {
                    acc += a * r;
                }
                *out = acc;
            }
        };
        if self.rows >= PAR_ROW_THRESHOLD {
            self.data
                .par_chunks(self.cols)
                .zip(out.data.par_chunks_mut(k))
                .for_each(|(a_row, out_row)| mul_row(a_row, out_row));
        } else {
            for (a_row, out_row) in self.data.chunks(self.cols).zip(out.data.chunks_mut(k)) {
                mul_row(a_row, out_row);
            }
        }
        out
    }

    /// Adds `bias` (length = cols) to every row.
    pub fn add_row_vector(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols, "bias length mismatch");
        for row in self.data.chunks_mut(self.cols) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    /// Column sums, length = cols. Fixed top-to-bottom order.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }
}
