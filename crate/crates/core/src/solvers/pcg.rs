//! Preconditioned conjugate gradients.
//!
//! The preconditioner is applied at the start of each cycle, so the residual
//! it sees is the one from the previous update. Convergence is judged on the
//! plain residual norm; when the recursively updated residual drops below the
//! threshold the true residual `b - A x` is recomputed and must confirm it.
//! If it does not, the recurrence restarts from the true residual; a restart
//! that fails to halve the true residual ends the run as not converged.

use crate::discretization::StencilOperator;
use crate::error::{check_len, Error, Result};
use crate::grid::{axpy, dot_unchecked};
use crate::splitting::Splitting;

pub trait Preconditioner {
    /// `z = M^-1 r`.
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()>;
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

/// `sum_{j=0}^{2m} (P^-1 Q)^j P^-1`, evaluated as `2m + 1` stationary
/// splitting steps from zero.
pub struct PolynomialPreconditioner<'a> {
    pub splitting: Splitting<'a>,
    pub m: usize,
    scratch: Vec<f64>,
}

impl<'a> PolynomialPreconditioner<'a> {
    pub fn new(splitting: Splitting<'a>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        Ok(Self {
            scratch: vec![0.0; splitting.op.len()],
            splitting,
            m,
        })
    }
}

impl Preconditioner for PolynomialPreconditioner<'_> {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        check_len(self.splitting.op.len(), r.len())?;
        check_len(r.len(), z.len())?;
        polynomial_into(&self.splitting, self.m, r, z, &mut self.scratch);
        Ok(())
    }
}

/// One splitting step `z += P^-1 (v - A z)`; `fresh` means `z` is zero.
#[inline]
pub(crate) fn smooth_step(s: &Splitting<'_>, v: &[f64], z: &mut [f64], t: &mut [f64], fresh: bool) {
    if fresh {
        t.copy_from_slice(v);
    } else {
        s.op.residual_into(z, v, t);
    }
    s.p_inverse_in_place(t);
    axpy(1.0, t, z);
}

pub(crate) fn polynomial_into(
    s: &Splitting<'_>,
    m: usize,
    v: &[f64],
    z: &mut [f64],
    t: &mut [f64],
) {
    z.iter_mut().for_each(|x| *x = 0.0);
    for step in 0..2 * m + 1 {
        smooth_step(s, v, z, t, step == 0);
    }
}

/// Dense-checkable convenience: returns `M^-1 v` for the polynomial preconditioner.
pub fn precond_polynomial(s: &Splitting<'_>, m: usize, v: &[f64]) -> Result<Vec<f64>> {
    let mut p = PolynomialPreconditioner::new(*s, m)?;
    let mut z = vec![0.0; v.len()];
    p.apply(v, &mut z)?;
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOutcome {
    pub iterations: usize,
    pub converged: bool,
    /// `|b - A x|^2` of the returned iterate.
    pub residual_sq: f64,
}

/// Work vectors of one PCG run.
pub(crate) struct PcgVectors<'a> {
    pub r: &'a mut [f64],
    pub p: &'a mut [f64],
    pub z: &'a mut [f64],
    pub q: &'a mut [f64],
}

/// Core loop shared by the public [`pcg`] and the multilevel engine.
/// `threshold` bounds `|r|^2`. `x` holds the initial guess on entry.
pub(crate) fn pcg_core<F>(
    a: &StencilOperator,
    b: &[f64],
    x: &mut [f64],
    v: PcgVectors<'_>,
    mut precondition: F,
    threshold: f64,
    max_iterations: usize,
) -> Result<PcgOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let PcgVectors { r, p, z, q } = v;
    a.residual_into(x, b, r);
    let mut rr = dot_unchecked(r, r);
    if rr < threshold || rr == 0.0 {
        return Ok(PcgOutcome {
            iterations: 0,
            converged: true,
            residual_sq: rr,
        });
    }
    let mut rho_prev = 0.0;
    let mut it = 0;
    // After a residual replacement the recurrence restarts from `p = z`.
    let mut restart = true;
    // True residual at the last replacement; no progress between two
    // replacements means round-off stagnation.
    let mut last_true = f64::INFINITY;
    while it < max_iterations {
        precondition(r, z)?;
        let rho = dot_unchecked(r, z);
        if !(rho > 0.0) {
            return Err(Error::Indefinite {
                iteration: it + 1,
                value: rho,
            });
        }
        if restart {
            p.copy_from_slice(z);
            restart = false;
        } else {
            let beta = rho / rho_prev;
            for (pi, zi) in p.iter_mut().zip(z.iter()) {
                *pi = zi + beta * *pi;
            }
        }
        a.apply_into(p, q);
        let pq = dot_unchecked(p, q);
        if !(pq > 0.0) {
            return Err(Error::Indefinite {
                iteration: it + 1,
                value: pq,
            });
        }
        let alpha = rho / pq;
        axpy(alpha, p, x);
        axpy(-alpha, q, r);
        rho_prev = rho;
        it += 1;
        rr = dot_unchecked(r, r);
        if rr < threshold {
            a.residual_into(x, b, r);
            rr = dot_unchecked(r, r);
            if rr < threshold {
                return Ok(PcgOutcome {
                    iterations: it,
                    converged: true,
                    residual_sq: rr,
                });
            }
            if rr >= 0.5 * last_true {
                return Ok(PcgOutcome {
                    iterations: it,
                    converged: false,
                    residual_sq: rr,
                });
            }
            last_true = rr;
            restart = true;
        }
    }
    a.residual_into(x, b, r);
    rr = dot_unchecked(r, r);
    Ok(PcgOutcome {
        iterations: it,
        converged: rr < threshold,
        residual_sq: rr,
    })
}

/// Solve `A x = b` from the initial guess in `x` until `|r|^2 < threshold`.
pub fn pcg(
    a: &StencilOperator,
    b: &[f64],
    x: &mut [f64],
    m: &mut dyn Preconditioner,
    threshold: f64,
    max_iterations: usize,
) -> Result<PcgOutcome> {
    let n = a.len();
    check_len(n, b.len())?;
    check_len(n, x.len())?;
    let (mut r, mut p, mut z, mut q) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let v = PcgVectors {
        r: &mut r,
        p: &mut p,
        z: &mut z,
        q: &mut q,
    };
    pcg_core(a, b, x, v, |r, z| m.apply(r, z), threshold, max_iterations)
}
