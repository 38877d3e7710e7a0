//! Thomas algorithm for tridiagonal systems.
//!
//! The implicit part of every time stepper in this crate solves the same
//! tridiagonal matrix at each step, so the forward-elimination coefficients
//! are factored once and reused.

use crate::error::{Error, Result};

/// Tridiagonal matrix in banded storage. Row `i` is
/// `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), diag.len());
        assert_eq!(upper.len(), diag.len());
        Tridiagonal { lower, diag, upper }
    }

    /// Constant-coefficient matrix of size `n`.
    pub fn uniform(n: usize, lower: f64, diag: f64, upper: f64) -> Self {
        Tridiagonal {
            lower: vec![lower; n],
            diag: vec![diag; n],
            upper: vec![upper; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `out = A x`, used by tests to verify solves by residual.
    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        assert_eq!(x.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * x[i + 1];
            }
            out[i] = v;
        }
    }

    /// LU-style factorization for repeated solves. Fails on a zero pivot.
    pub fn factor(&self) -> Result<FactoredTridiagonal> {
        let n = self.len();
        let mut w = vec![0.0; n]; // eliminated upper diagonal
        let mut inv_pivot = vec![0.0; n];
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - self.lower[i] * w[i - 1];
            }
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSystem { row: i });
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                w[i] = self.upper[i] * inv_pivot[i];
            }
        }
        Ok(FactoredTridiagonal {
            lower: self.lower.clone(),
            w,
            inv_pivot,
        })
    }
}

/// Pre-factored system; `solve_in_place` costs one forward and one backward sweep.
#[derive(Debug, Clone)]
pub struct FactoredTridiagonal {
    lower: Vec<f64>,
    w: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl FactoredTridiagonal {
    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Solves `A x = rhs`, overwriting `rhs` with `x`.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.w[i] * rhs[i + 1];
        }
    }
}
