//! Operator splittings `A = P - Q` with cheap `P^-1`.
//!
//! With `A = D + L + U`:
//! * symmetric Gauss-Seidel: `P = (D + L) D^-1 (D + U)`, `Q = L D^-1 U`;
//! * modified Jacobi: `P = 2D`, `Q = D - L - U`.
//!
//! `Q` is never formed. The smoother `H = P^-1 Q` is applied as
//! `H v = v - P^-1 A v` and its transpose as `H^T v = v - A P^-1 v`.

use serde::{Deserialize, Serialize};

use crate::discretization::StencilOperator;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplittingKind {
    #[default]
    SymmetricGaussSeidel,
    ModifiedJacobi,
}

impl std::str::FromStr for SplittingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgs" | "symmetric-gauss-seidel" => Ok(Self::SymmetricGaussSeidel),
            "jacobi" | "modified-jacobi" => Ok(Self::ModifiedJacobi),
            other => Err(Error::InvalidArgument(format!(
                "unknown splitting '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Splitting<'a> {
    pub kind: SplittingKind,
    pub op: &'a StencilOperator,
}

impl<'a> Splitting<'a> {
    pub fn new(kind: SplittingKind, op: &'a StencilOperator) -> Result<Self> {
        if let Some(k) = op.diag.iter().position(|&d| d == 0.0 || !d.is_finite()) {
            return Err(Error::ZeroDiagonal(k));
        }
        Ok(Self { kind, op })
    }

    pub fn apply_p_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.op.len(), v.len())?;
        let mut w = v.to_vec();
        self.p_inverse_in_place(&mut w);
        Ok(w)
    }

    /// `P^-1 Q v`.
    pub fn apply_smoother(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.op.len(), v.len())?;
        let mut t = vec![0.0; v.len()];
        self.op.apply_into(v, &mut t);
        self.p_inverse_in_place(&mut t);
        Ok(v.iter().zip(&t).map(|(a, b)| a - b).collect())
    }

    /// `Q P^-1 v`, the transpose of the smoother.
    pub fn apply_smoother_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.op.len(), v.len())?;
        let w = self.apply_p_inverse(v)?;
        let aw = self.op.apply(&w)?;
        Ok(v.iter().zip(&aw).map(|(a, b)| a - b).collect())
    }

    /// Overwrites `v` with `P^-1 v`.
    pub(crate) fn p_inverse_in_place(&self, v: &mut [f64]) {
        match self.kind {
            SplittingKind::ModifiedJacobi => {
                for (x, d) in v.iter_mut().zip(&self.op.diag) {
                    *x /= 2.0 * d;
                }
            }
            SplittingKind::SymmetricGaussSeidel => sgs_in_place(self.op, v),
        }
    }

    /// Max |P - Q - A| over all entries, from dense reconstructions of P and
    /// Q = L D^-1 U (SGS) or D - L - U (modified Jacobi).
    pub fn verify(&self) -> Result<f64> {
        let n = self.op.len();
        if n > 4096 {
            return Err(Error::InvalidArgument(format!(
                "dense splitting check limited to 4096 cells, got {n}"
            )));
        }
        let a = self.op.to_dense();
        let mut d = vec![0.0; n * n];
        let mut l = vec![0.0; n * n];
        let mut u = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let v = a[r * n + c];
                match r.cmp(&c) {
                    std::cmp::Ordering::Equal => d[r * n + c] = v,
                    std::cmp::Ordering::Greater => l[r * n + c] = v,
                    std::cmp::Ordering::Less => u[r * n + c] = v,
                }
            }
        }
        let (p, q) = match self.kind {
            SplittingKind::ModifiedJacobi => {
                let p: Vec<f64> = d.iter().map(|x| 2.0 * x).collect();
                let q: Vec<f64> = (0..n * n).map(|k| d[k] - l[k] - u[k]).collect();
                (p, q)
            }
            SplittingKind::SymmetricGaussSeidel => {
                // (D + L) D^-1 (D + U) = D + L + U + L D^-1 U
                let mut ldu = vec![0.0; n * n];
                for r in 0..n {
                    for k in 0..r {
                        let lrk = l[r * n + k];
                        if lrk == 0.0 {
                            continue;
                        }
                        let s = lrk / d[k * n + k];
                        for c in k + 1..n {
                            ldu[r * n + c] += s * u[k * n + c];
                        }
                    }
                }
                let p: Vec<f64> = (0..n * n).map(|k| d[k] + l[k] + u[k] + ldu[k]).collect();
                (p, ldu)
            }
        };
        Ok((0..n * n)
            .map(|k| (p[k] - q[k] - a[k]).abs())
            .fold(0.0, f64::max))
    }
}

/// Forward solve `(D + L) z = v`, then backward solve `(D + U) w = D z`, in
/// canonical row-major order.
fn sgs_in_place(op: &StencilOperator, v: &mut [f64]) {
    let nx = op.grid.nx;
    let ny = op.grid.ny;
    let (d, e, n) = (&op.diag, &op.east, &op.north);
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let k = row + i;
            let mut s = v[k];
            if i > 0 {
                s -= e[k - 1] * v[k - 1];
            }
            if j > 0 {
                s -= n[k - nx] * v[k - nx];
            }
            v[k] = s / d[k];
        }
    }
    for j in (0..ny).rev() {
        let row = j * nx;
        for i in (0..nx).rev() {
            let k = row + i;
            let mut s = 0.0;
            if i + 1 < nx {
                s += e[k] * v[k + 1];
            }
            if j + 1 < ny {
                s += n[k] * v[k + nx];
            }
            v[k] -= s / d[k];
        }
    }
}
