//! Experiment drivers behind the `mscg` binary: field generation, problem
//! setup, the studies and their CSV/JSON output.

pub mod config;
pub mod report;
pub mod studies;

use std::sync::Arc;

use crate::discretization::{
    boundary_lift, BoundaryCondition, BoundarySpec, LiftedProblem, StencilOperator,
};
use crate::error::{check_len, Result};
use crate::field::generate_lognormal_field;
use crate::grid::{rms_residual, CellField, Grid2D};
use crate::multiscale::{HierarchyParams, LevelHierarchy};
use crate::solvers::{Method, SolveParams, SolveReport, Solver};

pub use config::{Experiment, ExperimentConfig, ScalingFamily, SideCondition};
pub use report::{fit_accuracy, AccuracyFit, StudyOutput, StudyRow};
pub use studies::{
    run_accuracy_study, run_base_case, run_channel_case, run_comparison, run_experiment,
    run_scaling_study, run_variance_study,
};

/// Left/right pressures with either no-flow or linearly interpolated
/// Dirichlet values on the top and bottom.
pub fn boundary_for(
    grid: &Grid2D,
    p_left: f64,
    p_right: f64,
    top_bottom: SideCondition,
) -> BoundarySpec {
    let mut bc = BoundarySpec::channel(grid, p_left, p_right);
    if top_bottom == SideCondition::Dirichlet {
        let w = grid.width();
        let profile: Vec<BoundaryCondition> = (0..grid.nx)
            .map(|i| {
                BoundaryCondition::dirichlet(
                    p_left + (p_right - p_left) * (i as f64 + 0.5) * grid.dx / w,
                )
            })
            .collect();
        bc.bottom = profile.clone();
        bc.top = profile;
    }
    bc
}

/// A permeability field, its zero-boundary system and level hierarchy.
pub struct Problem {
    pub permeability: CellField,
    pub boundary: BoundarySpec,
    pub lifted: LiftedProblem,
    pub hierarchy: Arc<LevelHierarchy>,
}

impl Problem {
    pub fn new(
        permeability: CellField,
        boundary: BoundarySpec,
        params: &HierarchyParams,
    ) -> Result<Self> {
        let lifted = boundary_lift(&permeability, &boundary, None)?;
        let hierarchy = Arc::new(LevelHierarchy::build(&lifted.transmissivity, params)?);
        Ok(Self {
            permeability,
            boundary,
            lifted,
            hierarchy,
        })
    }

    /// Generate the configured field on `grid` and set up the problem.
    pub fn generate(cfg: &ExperimentConfig, grid: Grid2D) -> Result<Self> {
        let k = generate_lognormal_field(grid, &cfg.correlation()?, cfg.seed)?;
        let bc = boundary_for(&grid, cfg.p_left, cfg.p_right, cfg.top_bottom);
        Self::new(k, bc, &cfg.hierarchy_params())
    }

    pub fn grid(&self) -> Grid2D {
        self.permeability.grid
    }

    pub fn operator(&self) -> &StencilOperator {
        &self.lifted.operator
    }

    pub fn rhs_rms(&self) -> f64 {
        rms_residual(&self.lifted.source).unwrap_or(0.0)
    }

    /// Solve for the lifted unknown from zero.
    pub fn solve(&self, method: Method, params: SolveParams) -> Result<(Vec<f64>, SolveReport)> {
        Solver::new(self.hierarchy.clone(), method, params)?.solve_zero(&self.lifted.source)
    }

    /// Solve with a different right-hand side (e.g. a manufactured one).
    pub fn solve_rhs(
        &self,
        b: &[f64],
        method: Method,
        params: SolveParams,
    ) -> Result<(Vec<f64>, SolveReport)> {
        Solver::new(self.hierarchy.clone(), method, params)?.solve_zero(b)
    }
}

/// Turn an approximate solution into an exact one: returns `(A x, x)`, which
/// equals the original right-hand side plus the residual of `x`.
pub fn make_exact_test_problem(
    a: &StencilOperator,
    b: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(a.len(), b.len())?;
    let ax = a.apply(x)?;
    Ok((ax, x.to_vec()))
}
