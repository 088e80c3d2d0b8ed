//! Iterative solvers over a [`LevelHierarchy`](crate::multiscale::LevelHierarchy).
//!
//! * [`pcg`] - conjugate gradients with a pluggable preconditioner.
//! * [`engine`] - the polynomial, Tatebe and recursive multi-scale
//!   preconditioners, standard multigrid, and the [`Solver`] driving them.
//! * [`direct`] - dense Cholesky used on the coarsest level.
//! * [`report`] - per-level iteration tables and the level-transition trace.

pub mod direct;
pub mod engine;
pub mod pcg;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use engine::Solver;
pub use pcg::{pcg, IdentityPreconditioner, PcgOutcome, PolynomialPreconditioner, Preconditioner};
pub use report::{EventKind, LevelEvent, LevelStats, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// PCG whose preconditioner solves the coarse problem with an inner PCG.
    #[default]
    RecursiveMs,
    /// PCG with one recursive multigrid sweep as preconditioner.
    Tatebe,
    /// PCG with the truncated splitting series `sum_{j<=2m} H^j P^-1`.
    Polynomial,
    /// Stationary iteration `x += M^-1 (b - A x)` with the Tatebe sweep.
    StandardMultigrid,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::RecursiveMs,
        Method::Tatebe,
        Method::Polynomial,
        Method::StandardMultigrid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::RecursiveMs => "recursive-ms",
            Method::Tatebe => "tatebe",
            Method::Polynomial => "polynomial",
            Method::StandardMultigrid => "standard-multigrid",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ms" | "recursive-ms" | "recursive" => Ok(Method::RecursiveMs),
            "tatebe" | "mgcg" => Ok(Method::Tatebe),
            "polynomial" | "poly" => Ok(Method::Polynomial),
            "mg" | "multigrid" | "standard-multigrid" => Ok(Method::StandardMultigrid),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveParams {
    /// Target RMS residual on the finest level (absolute).
    pub epsilon: f64,
    /// Per-level tightening factor of the squared tolerance.
    pub f: f64,
    /// Iteration cap for every PCG (and for standard multigrid).
    pub max_iterations: usize,
    /// Overrides the hierarchy's per-level smoothing degree.
    pub m: Option<usize>,
    /// Inner solves stop once `|r| <= relative_floor * |rhs|` even if the
    /// level tolerance is tighter; keeps deep levels from chasing round-off.
    pub relative_floor: f64,
    /// Standard multigrid gives up once the residual norm grows by this factor.
    pub divergence_factor: f64,
    pub record_events: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            f: 0.1,
            max_iterations: 100,
            m: None,
            relative_floor: 1e-12,
            divergence_factor: 10.0,
            record_events: true,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.f > 0.0 && self.f <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "f must lie in (0, 1], got {}",
                self.f
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        if self.m == Some(0) {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if !(self.relative_floor >= 0.0) || !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidArgument(
                "relative_floor must be >= 0 and divergence_factor > 1".into(),
            ));
        }
        Ok(())
    }
}

/// Threshold on `|r|^2` at level `k`: `n_k * f^k * epsilon^2`.
pub fn level_tolerance(k: usize, params: &SolveParams, n_k: usize) -> f64 {
    n_k as f64 * params.f.powi(k as i32) * params.epsilon * params.epsilon
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_examples() {
        let p = SolveParams {
            epsilon: 1e-5,
            f: 0.1,
            ..Default::default()
        };
        assert!((level_tolerance(0, &p, 1) - 1e-10).abs() < 1e-24);
        assert!((level_tolerance(2, &p, 1) - 1e-12).abs() < 1e-26);
        assert!((level_tolerance(0, &p, 400) - 4e-8).abs() < 1e-22);
        let q = SolveParams { f: 1.0, ..p };
        assert_eq!(
            level_tolerance(3, &q, 7) / 7.0,
            level_tolerance(0, &q, 7) / 7.0
        );
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("cg".parse::<Method>().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SolveParams::default().validate().is_ok());
        assert!(SolveParams {
            epsilon: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolveParams {
            f: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolveParams {
            max_iterations: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolveParams {
            m: Some(0),
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
