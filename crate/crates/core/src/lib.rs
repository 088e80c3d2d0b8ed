//! Multi-scale preconditioned conjugate gradient solvers for the 2-D porous
//! flow equation `div(K grad P) = S` on regular grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] - grid geometry, cell/face containers and vector primitives.
//! * [`field`] - log-normal permeability field generation and manipulation.
//! * [`discretization`] - harmonic-mean transmissivities, the 5-point operator
//!   and the boundary lift to a zero-boundary problem.
//! * [`splitting`] - symmetric Gauss-Seidel and modified Jacobi splittings.
//! * [`multiscale`] - coarse grid selection, transmissivity coarse graining,
//!   transfer operators and the level hierarchy.
//! * [`solvers`] - PCG, the polynomial, multigrid and recursive multi-scale
//!   preconditioners, standard multigrid and the coarsest-level direct solver.
//! * [`harness`] - experiment drivers used by the `mscg` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretization;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod multiscale;
pub mod solvers;
pub mod splitting;

pub use discretization::{
    BoundaryCondition, BoundaryKind, BoundarySpec, LiftedProblem, StencilOperator,
};
pub use error::{Error, Result};
pub use field::{CorrelationModel, CorrelationSpec};
pub use grid::{CellField, FaceField, Grid2D};
pub use multiscale::{HierarchyParams, Interpolation, LevelHierarchy, TransferOperator};
pub use solvers::{Method, SolveParams, SolveReport, Solver};
pub use splitting::{Splitting, SplittingKind};
