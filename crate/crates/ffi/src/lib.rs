//! C ABI for the `mscg` solver.
//!
//! Problems and solvers are opaque heap handles released with their `_free`
//! functions. Every fallible call returns an [`MscgStatus`]; the message of
//! the last failure on the calling thread is available from
//! [`mscg_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use mscg::field::generate_lognormal_field;
use mscg::harness::{boundary_for, Problem, SideCondition};
use mscg::multiscale::{HierarchyParams, MPolicy};
use mscg::{
    CellField, CorrelationModel, CorrelationSpec, Error, Grid2D, Interpolation, Method,
    SolveParams, SolveReport, Solver, SplittingKind,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MscgStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    DimensionMismatch = 3,
    /// The operator or a preconditioner is not positive definite.
    Singular = 4,
    /// The solve hit its iteration cap; outputs hold the last iterate.
    NotConverged = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MscgMethod {
    RecursiveMs = 0,
    Tatebe = 1,
    Polynomial = 2,
    StandardMultigrid = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MscgCorrelationModel {
    Gaussian = 0,
    PowerLaw = 1,
}

/// Log-normal permeability statistics. Cutoff lengths are in the same
/// units as the cell sizes; the angle is in radians from the x axis.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MscgFieldSpec {
    pub model: MscgCorrelationModel,
    pub cutoff_major: f64,
    pub cutoff_minor: f64,
    pub angle_rad: f64,
    pub log_mean: f64,
    pub log_variance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MscgHierarchyOptions {
    /// Linear coarsening factor between levels (> 1).
    pub scale: f64,
    pub semi_coarsen: bool,
    /// Modified Jacobi instead of symmetric Gauss-Seidel.
    pub jacobi: bool,
    /// Piecewise-constant instead of linear interpolation.
    pub constant_interpolation: bool,
    /// Levels with fewer unknowns than this are solved directly.
    pub coarsest_threshold: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MscgSolveOptions {
    /// Absolute RMS residual target; when not positive, `reduction` is used.
    pub epsilon: f64,
    /// Target reduction of `|r|^2 / N` from the zero guess.
    pub reduction: f64,
    /// Per-level tolerance tightening factor in (0, 1).
    pub f: f64,
    pub max_iterations: usize,
    /// Smoothing degree on every level; 0 picks it from the coarsening factor.
    pub m: usize,
}

/// A permeability field with its boundary conditions and level hierarchy.
pub struct MscgProblem {
    inner: Arc<Problem>,
}

/// A preconditioned solver bound to a problem.
pub struct MscgSolver {
    problem: Arc<Problem>,
    solver: Solver,
    last: Option<SolveReport>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MscgStatus {
    match e {
        Error::InvalidArgument(_) | Error::NotSpd | Error::Format(_) => MscgStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => MscgStatus::DimensionMismatch,
        Error::IsolatedCell { .. }
        | Error::ZeroDiagonal(_)
        | Error::NotPositiveDefinite { .. }
        | Error::Indefinite { .. }
        | Error::PureNeumann(_) => MscgStatus::Singular,
        Error::Io(_) => MscgStatus::Internal,
    }
}

/// Run `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<MscgStatus, (MscgStatus, String)>) -> MscgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            MscgStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (MscgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (MscgStatus, String) {
    (MscgStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: &str) -> (MscgStatus, String) {
    (MscgStatus::InvalidArgument, msg.to_string())
}

fn check_len(expected: usize, got: usize) -> Result<(), (MscgStatus, String)> {
    if expected != got {
        return Err((
            MscgStatus::DimensionMismatch,
            format!("expected {expected} values, got {got}"),
        ));
    }
    Ok(())
}

impl From<MscgMethod> for Method {
    fn from(m: MscgMethod) -> Self {
        match m {
            MscgMethod::RecursiveMs => Method::RecursiveMs,
            MscgMethod::Tatebe => Method::Tatebe,
            MscgMethod::Polynomial => Method::Polynomial,
            MscgMethod::StandardMultigrid => Method::StandardMultigrid,
        }
    }
}

impl MscgHierarchyOptions {
    fn params(&self) -> HierarchyParams {
        HierarchyParams {
            scale: self.scale,
            m_policy: MPolicy::ScaleFactor,
            coarsest_threshold: self.coarsest_threshold,
            splitting: if self.jacobi {
                SplittingKind::ModifiedJacobi
            } else {
                SplittingKind::SymmetricGaussSeidel
            },
            interpolation: if self.constant_interpolation {
                Interpolation::PiecewiseConstant
            } else {
                Interpolation::Linear
            },
            semi_coarsen: self.semi_coarsen,
            ..Default::default()
        }
    }
}

impl MscgSolveOptions {
    fn params(&self, rhs_rms: f64) -> Result<SolveParams, (MscgStatus, String)> {
        let epsilon = if self.epsilon > 0.0 {
            self.epsilon
        } else if self.reduction > 1.0 {
            rhs_rms / self.reduction.sqrt()
        } else {
            return Err(invalid("either epsilon > 0 or reduction > 1 is required"));
        };
        let p = SolveParams {
            epsilon,
            f: self.f,
            max_iterations: self.max_iterations,
            m: (self.m > 0).then_some(self.m),
            ..Default::default()
        };
        p.validate().map_err(lib_err)?;
        Ok(p)
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mscg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn mscg_hierarchy_options_default() -> MscgHierarchyOptions {
    let d = HierarchyParams::default();
    MscgHierarchyOptions {
        scale: d.scale,
        semi_coarsen: d.semi_coarsen,
        jacobi: false,
        constant_interpolation: false,
        coarsest_threshold: d.coarsest_threshold,
    }
}

#[no_mangle]
pub extern "C" fn mscg_solve_options_default() -> MscgSolveOptions {
    let d = SolveParams::default();
    MscgSolveOptions {
        epsilon: 0.0,
        reduction: 1e10,
        f: d.f,
        max_iterations: d.max_iterations,
        m: 0,
    }
}

/// Fill `out` (`nx * ny` values, row-major from the bottom row) with a
/// log-normal permeability field.
///
/// # Safety
/// `spec` must point to a valid spec and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mscg_generate_field(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    spec: *const MscgFieldSpec,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> MscgStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null_err("spec"))?;
        if out.is_null() {
            return Err(null_err("out"));
        }
        let grid = Grid2D::new(nx, ny, dx, dy).map_err(lib_err)?;
        check_len(grid.len(), out_len)?;
        let model = match spec.model {
            MscgCorrelationModel::Gaussian => CorrelationModel::Gaussian,
            MscgCorrelationModel::PowerLaw => CorrelationModel::PowerLaw,
        };
        let cs = CorrelationSpec::from_cutoffs(
            model,
            spec.cutoff_major,
            spec.cutoff_minor,
            spec.angle_rad,
            spec.log_mean,
            spec.log_variance,
        )
        .map_err(lib_err)?;
        let k = generate_lognormal_field(grid, &cs, seed).map_err(lib_err)?;
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&k.values);
        Ok(MscgStatus::Ok)
    })
}

/// Build a problem on an `nx` by `ny` grid: pressure `p_left` and `p_right`
/// on the left and right sides, and on the top and bottom either no flow or
/// (with `dirichlet_sides`) the linear profile between them.
///
/// # Safety
/// `permeability` must point to `len` readable doubles, `options` may be null
/// (defaults) or point to valid options, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mscg_problem_new(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    permeability: *const f64,
    len: usize,
    p_left: f64,
    p_right: f64,
    dirichlet_sides: bool,
    options: *const MscgHierarchyOptions,
    out: *mut *mut MscgProblem,
) -> MscgStatus {
    guard(|| {
        if permeability.is_null() {
            return Err(null_err("permeability"));
        }
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let grid = Grid2D::new(nx, ny, dx, dy).map_err(lib_err)?;
        check_len(grid.len(), len)?;
        let values = std::slice::from_raw_parts(permeability, len).to_vec();
        let k = CellField::new(grid, values).map_err(lib_err)?;
        if k.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("permeability must be finite and positive"));
        }
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| mscg_hierarchy_options_default());
        let sides = if dirichlet_sides {
            SideCondition::Dirichlet
        } else {
            SideCondition::Neumann
        };
        let bc = boundary_for(&grid, p_left, p_right, sides);
        let problem = Problem::new(k, bc, &opts.params()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MscgProblem {
            inner: Arc::new(problem),
        }));
        Ok(MscgStatus::Ok)
    })
}

/// # Safety
/// `problem` must be null or a handle from [`mscg_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mscg_problem_free(problem: *mut MscgProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mscg_problem_len(problem: *const MscgProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.grid().len())
}

/// Number of grid levels in the hierarchy, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mscg_problem_num_levels(problem: *const MscgProblem) -> usize {
    problem
        .as_ref()
        .map_or(0, |p| p.inner.hierarchy.num_levels())
}

/// Create a solver. The solver keeps the problem alive on its own, so the
/// problem handle may be freed first.
///
/// # Safety
/// `problem` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mscg_solver_new(
    problem: *const MscgProblem,
    method: MscgMethod,
    options: *const MscgSolveOptions,
    out: *mut *mut MscgSolver,
) -> MscgStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null_err("problem"))?;
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| mscg_solve_options_default());
        let p = problem.inner.clone();
        let params = opts.params(p.rhs_rms())?;
        let solver = Solver::new(p.hierarchy.clone(), method.into(), params).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MscgSolver {
            problem: p,
            solver,
            last: None,
        }));
        Ok(MscgStatus::Ok)
    })
}

/// # Safety
/// `solver` must be null or a handle from [`mscg_solver_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mscg_solver_free(solver: *mut MscgSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Solve the problem from a zero guess and write the cell pressures into
/// `pressure` (`len` = number of cells). `iterations` may be null.
/// Returns `NotConverged` (with the last iterate written) at the iteration cap.
///
/// # Safety
/// `solver` must be live, `pressure` must hold `len` writable doubles and
/// `iterations` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn mscg_solver_solve(
    solver: *mut MscgSolver,
    pressure: *mut f64,
    len: usize,
    iterations: *mut usize,
) -> MscgStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null_err("solver"))?;
        if pressure.is_null() {
            return Err(null_err("pressure"));
        }
        check_len(s.problem.grid().len(), len)?;
        let (delta, rep) = s
            .solver
            .solve_zero(&s.problem.lifted.source)
            .map_err(lib_err)?;
        let p = s.problem.lifted.reconstruct(&delta).map_err(lib_err)?;
        std::slice::from_raw_parts_mut(pressure, len).copy_from_slice(&p.values);
        finish(s, rep, iterations)
    })
}

/// Solve `A x = rhs` for the zero-boundary operator of the problem, starting
/// from the values in `x`.
///
/// # Safety
/// `solver` must be live; `rhs` and `x` must each hold `len` doubles, `x`
/// writable; `iterations` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mscg_solver_solve_system(
    solver: *mut MscgSolver,
    rhs: *const f64,
    x: *mut f64,
    len: usize,
    iterations: *mut usize,
) -> MscgStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null_err("solver"))?;
        if rhs.is_null() || x.is_null() {
            return Err(null_err("rhs or x"));
        }
        check_len(s.problem.grid().len(), len)?;
        let b = std::slice::from_raw_parts(rhs, len);
        let xs = std::slice::from_raw_parts_mut(x, len);
        let rep = s.solver.solve(b, xs).map_err(lib_err)?;
        finish(s, rep, iterations)
    })
}

unsafe fn finish(
    s: &mut MscgSolver,
    rep: SolveReport,
    iterations: *mut usize,
) -> Result<MscgStatus, (MscgStatus, String)> {
    if let Some(it) = iterations.as_mut() {
        *it = rep.fine_iterations;
    }
    let status = if rep.converged {
        MscgStatus::Ok
    } else {
        set_error(&format!(
            "not converged after {} iterations",
            rep.fine_iterations
        ));
        MscgStatus::NotConverged
    };
    s.last = Some(rep);
    Ok(status)
}

/// JSON report of the last solve (per-level table and level trace), or null
/// if there was none. Release with [`mscg_string_free`].
///
/// # Safety
/// `solver` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mscg_solver_report_json(solver: *const MscgSolver) -> *mut c_char {
    let Some(rep) = solver.as_ref().and_then(|s| s.last.as_ref()) else {
        return ptr::null_mut();
    };
    match serde_json::to_string(rep)
        .ok()
        .and_then(|j| CString::new(j).ok())
    {
        Some(c) => c.into_raw(),
        None => {
            set_error("report serialisation failed");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mscg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
