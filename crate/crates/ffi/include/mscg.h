#ifndef MSCG_H
#define MSCG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MscgStatus {
  MSCG_STATUS_OK = 0,
  MSCG_STATUS_INVALID_ARGUMENT = 1,
  MSCG_STATUS_NULL_POINTER = 2,
  MSCG_STATUS_DIMENSION_MISMATCH = 3,
  // The operator or a preconditioner is not positive definite.
  MSCG_STATUS_SINGULAR = 4,
  // The solve hit its iteration cap; outputs hold the last iterate.
  MSCG_STATUS_NOT_CONVERGED = 5,
  MSCG_STATUS_INTERNAL = 6,
} MscgStatus;

typedef enum MscgCorrelationModel {
  MSCG_CORRELATION_MODEL_GAUSSIAN = 0,
  MSCG_CORRELATION_MODEL_POWER_LAW = 1,
} MscgCorrelationModel;

typedef enum MscgMethod {
  MSCG_METHOD_RECURSIVE_MS = 0,
  MSCG_METHOD_TATEBE = 1,
  MSCG_METHOD_POLYNOMIAL = 2,
  MSCG_METHOD_STANDARD_MULTIGRID = 3,
} MscgMethod;

// A permeability field with its boundary conditions and level hierarchy.
typedef struct MscgProblem MscgProblem;

// A preconditioned solver bound to a problem.
typedef struct MscgSolver MscgSolver;

typedef struct MscgHierarchyOptions {
  // Linear coarsening factor between levels (> 1).
  double scale;
  bool semi_coarsen;
  // Modified Jacobi instead of symmetric Gauss-Seidel.
  bool jacobi;
  // Piecewise-constant instead of linear interpolation.
  bool constant_interpolation;
  // Levels with fewer unknowns than this are solved directly.
  size_t coarsest_threshold;
} MscgHierarchyOptions;

typedef struct MscgSolveOptions {
  // Absolute RMS residual target; when not positive, `reduction` is used.
  double epsilon;
  // Target reduction of `|r|^2 / N` from the zero guess.
  double reduction;
  // Per-level tolerance tightening factor in (0, 1).
  double f;
  size_t max_iterations;
  // Smoothing degree on every level; 0 picks it from the coarsening factor.
  size_t m;
} MscgSolveOptions;

// Log-normal permeability statistics. Cutoff lengths are in the same
// units as the cell sizes; the angle is in radians from the x axis.
typedef struct MscgFieldSpec {
  enum MscgCorrelationModel model;
  double cutoff_major;
  double cutoff_minor;
  double angle_rad;
  double log_mean;
  double log_variance;
} MscgFieldSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *mscg_last_error_message(void);

struct MscgHierarchyOptions mscg_hierarchy_options_default(void);

struct MscgSolveOptions mscg_solve_options_default(void);

// Fill `out` (`nx * ny` values, row-major from the bottom row) with a
// log-normal permeability field.
//
// # Safety
// `spec` must point to a valid spec and `out` to `out_len` writable doubles.
enum MscgStatus mscg_generate_field(size_t nx,
                                    size_t ny,
                                    double dx,
                                    double dy,
                                    const struct MscgFieldSpec *spec,
                                    uint64_t seed,
                                    double *out,
                                    size_t out_len);

// Build a problem on an `nx` by `ny` grid: pressure `p_left` and `p_right`
// on the left and right sides, and on the top and bottom either no flow or
// (with `dirichlet_sides`) the linear profile between them.
//
// # Safety
// `permeability` must point to `len` readable doubles, `options` may be null
// (defaults) or point to valid options, and `out` must be writable.
enum MscgStatus mscg_problem_new(size_t nx,
                                 size_t ny,
                                 double dx,
                                 double dy,
                                 const double *permeability,
                                 size_t len,
                                 double p_left,
                                 double p_right,
                                 bool dirichlet_sides,
                                 const struct MscgHierarchyOptions *options,
                                 struct MscgProblem **out);

// # Safety
// `problem` must be null or a handle from [`mscg_problem_new`] not yet freed.
void mscg_problem_free(struct MscgProblem *problem);

// Number of cells, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
size_t mscg_problem_len(const struct MscgProblem *problem);

// Number of grid levels in the hierarchy, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
size_t mscg_problem_num_levels(const struct MscgProblem *problem);

// Create a solver. The solver keeps the problem alive on its own, so the
// problem handle may be freed first.
//
// # Safety
// `problem` must be a live handle, `options` null or valid, `out` writable.
enum MscgStatus mscg_solver_new(const struct MscgProblem *problem,
                                enum MscgMethod method,
                                const struct MscgSolveOptions *options,
                                struct MscgSolver **out);

// # Safety
// `solver` must be null or a handle from [`mscg_solver_new`] not yet freed.
void mscg_solver_free(struct MscgSolver *solver);

// Solve the problem from a zero guess and write the cell pressures into
// `pressure` (`len` = number of cells). `iterations` may be null.
// Returns `NotConverged` (with the last iterate written) at the iteration cap.
//
// # Safety
// `solver` must be live, `pressure` must hold `len` writable doubles and
// `iterations` must be null or writable.
enum MscgStatus mscg_solver_solve(struct MscgSolver *solver,
                                  double *pressure,
                                  size_t len,
                                  size_t *iterations);

// Solve `A x = rhs` for the zero-boundary operator of the problem, starting
// from the values in `x`.
//
// # Safety
// `solver` must be live; `rhs` and `x` must each hold `len` doubles, `x`
// writable; `iterations` null or writable.
enum MscgStatus mscg_solver_solve_system(struct MscgSolver *solver,
                                         const double *rhs,
                                         double *x,
                                         size_t len,
                                         size_t *iterations);

// JSON report of the last solve (per-level table and level trace), or null
// if there was none. Release with [`mscg_string_free`].
//
// # Safety
// `solver` must be null or a live handle.
char *mscg_solver_report_json(const struct MscgSolver *solver);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void mscg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSCG_H */
