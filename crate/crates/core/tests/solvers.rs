//! Every method and hierarchy option against a dense factorisation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mscg::discretization::{boundary_lift, BoundarySpec};
use mscg::multiscale::{HierarchyParams, LevelHierarchy};
use mscg::{CellField, Grid2D, Interpolation, Method, SolveParams, Solver, SplittingKind};

fn relative_energy_error(op: &mscg::StencilOperator, b: &[f64], x: &[f64]) -> f64 {
    let n = op.len();
    let a = DMatrix::from_row_slice(n, n, &op.to_dense());
    let exact = a
        .clone()
        .cholesky()
        .unwrap()
        .solve(&DVector::from_column_slice(b));
    let d = DVector::from_column_slice(x) - &exact;
    (d.dot(&(&a * &d)) / exact.dot(&(&a * &exact))).sqrt()
}

#[test]
fn all_methods_and_options_match_dense_solve() {
    let g = Grid2D::new(40, 20, 3.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let k = CellField::new(
        g,
        (0..g.len())
            .map(|_| 10f64.powf(rng.random_range(-2.0..2.0)))
            .collect(),
    )
    .unwrap();
    let lp = boundary_lift(&k, &BoundarySpec::channel(&g, 1.0, 0.0), None).unwrap();
    for splitting in [
        SplittingKind::SymmetricGaussSeidel,
        SplittingKind::ModifiedJacobi,
    ] {
        for interpolation in [Interpolation::Linear, Interpolation::PiecewiseConstant] {
            for semi_coarsen in [false, true] {
                let hp = HierarchyParams {
                    splitting,
                    interpolation,
                    semi_coarsen,
                    coarsest_threshold: 16,
                    scale: 3.0,
                    ..Default::default()
                };
                let h = Arc::new(LevelHierarchy::build(&lp.transmissivity, &hp).unwrap());
                assert!(h.num_levels() >= 3);
                for method in [
                    Method::RecursiveMs,
                    Method::Tatebe,
                    Method::StandardMultigrid,
                ] {
                    let params = SolveParams {
                        epsilon: 1e-13,
                        max_iterations: 400,
                        ..Default::default()
                    };
                    let (x, rep) = Solver::new(h.clone(), method, params)
                        .unwrap()
                        .solve_zero(&lp.source)
                        .unwrap();
                    let tag =
                        format!("{method} {splitting:?} {interpolation:?} semi={semi_coarsen}");
                    // Stationary multigrid may fail on rough fields but must say so.
                    if method == Method::StandardMultigrid && !rep.converged {
                        assert!(
                            rep.diverged || rep.fine_iterations == params.max_iterations,
                            "{tag}"
                        );
                        continue;
                    }
                    assert!(rep.converged, "{tag}");
                    let e = relative_energy_error(&lp.operator, &lp.source, &x);
                    assert!(e < 1e-9, "{tag}: {e:e}");
                }
            }
        }
    }
}

#[test]
fn standard_multigrid_converges_on_smooth_field() {
    let g = Grid2D::unit(32, 32).unwrap();
    let k = CellField::new(
        g,
        (0..g.len())
            .map(|c| 1.0 + 0.5 * ((c % 32) as f64 / 5.0).sin())
            .collect(),
    )
    .unwrap();
    let lp = boundary_lift(&k, &BoundarySpec::channel(&g, 1.0, 0.0), None).unwrap();
    let h =
        Arc::new(LevelHierarchy::build(&lp.transmissivity, &HierarchyParams::default()).unwrap());
    let params = SolveParams {
        epsilon: 1e-13,
        ..Default::default()
    };
    let (x, rep) = Solver::new(h, Method::StandardMultigrid, params)
        .unwrap()
        .solve_zero(&lp.source)
        .unwrap();
    assert!(rep.converged && !rep.diverged);
    assert!(relative_energy_error(&lp.operator, &lp.source, &x) < 1e-9);
}

#[test]
fn multiscale_beats_polynomial_on_rough_field() {
    let g = Grid2D::unit(64, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = CellField::new(
        g,
        (0..g.len())
            .map(|_| 10f64.powf(rng.random_range(-2.0..2.0)))
            .collect(),
    )
    .unwrap();
    let lp = boundary_lift(&k, &BoundarySpec::channel(&g, 1.0, 0.0), None).unwrap();
    let h =
        Arc::new(LevelHierarchy::build(&lp.transmissivity, &HierarchyParams::default()).unwrap());
    let params = SolveParams {
        epsilon: 1e-10,
        max_iterations: 1000,
        ..Default::default()
    };
    let its = |m: Method| {
        Solver::new(h.clone(), m, params)
            .unwrap()
            .solve_zero(&lp.source)
            .unwrap()
            .1
            .fine_iterations
    };
    let (ms, poly) = (its(Method::RecursiveMs), its(Method::Polynomial));
    assert!(ms * 3 <= poly, "recursive-ms {ms}, polynomial {poly}");
}
