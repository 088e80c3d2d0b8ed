//! Dense Cholesky factorization for the coarsest level.

use crate::discretization::StencilOperator;
use crate::error::{check_len, Error, Result};

/// Lower-triangular Cholesky factor `A = L L^T`, row-major.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
    /// Set when the factorization is of `A + c 1 1^T` because `A` only is
    /// semidefinite with the constants as null space.
    deflated: bool,
}

impl DenseCholesky {
    /// Factor a dense symmetric matrix (row-major, `n * n`).
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        check_len(n * n, a.len())?;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self {
            n,
            l,
            deflated: false,
        })
    }

    /// Factor a stencil operator. A singular (pure Neumann) operator is
    /// regularised by adding a multiple of `1 1^T`, which leaves solutions of
    /// consistent systems unchanged up to their mean.
    pub fn from_operator(op: &StencilOperator) -> Result<Self> {
        let n = op.len();
        let mut a = op.to_dense();
        if op.is_anchored() {
            return Self::factor(&a, n);
        }
        let c = op.diag.iter().cloned().fold(0.0, f64::max) / n as f64;
        for v in a.iter_mut() {
            *v += c;
        }
        let mut f = Self::factor(&a, n)?;
        f.deflated = true;
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_deflated(&self) -> bool {
        self.deflated
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let l = &self.l;
        if self.deflated {
            // Project out the constant so the system stays consistent.
            let mean = x.iter().sum::<f64>() / n as f64;
            x.iter_mut().for_each(|v| *v -= mean);
        }
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= l[i * n + k] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
    }
}

/// Solve `A x = b` for a dense symmetric positive definite `A`.
pub fn direct_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    DenseCholesky::factor(a, n)?.solve(b)
}
