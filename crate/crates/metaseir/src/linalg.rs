//! Small dense square matrices and a power-iteration spectral radius.

use crate::error::{Error, Result};

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix rows must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Spectral radius of a nonnegative matrix by power iteration.
///
/// Converges when two successive eigenvalue estimates agree to within
/// `tol`; errors with [`Error::NonConvergence`] after `max_iter` sweeps.
pub fn spectral_radius(m: &SquareMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0_f64;
    for _ in 0..max_iter {
        m.mul_vec(&v, &mut w);
        let norm = w.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if norm == 0.0 {
            // nilpotent direction; the dominant eigenvalue is zero
            return Ok(0.0);
        }
        let prev = lambda;
        lambda = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (lambda - prev).abs() < tol * (1.0 + lambda) {
            return Ok(lambda);
        }
    }
    Err(Error::NonConvergence {
        what: "power iteration",
        iterations: max_iter,
    })
}
