//! Multilevel preconditioners and the solver that owns their work vectors.
//!
//! All three multilevel variants share one cycle, started from `z = 0`:
//! `m` splitting steps, a coarse correction `z += E W R (v - A z)`, then `m`
//! more steps. This evaluates
//! `M^-1 = H^m W (H^T)^m + sum_{j<2m} H^j P^-1` with `H = P^-1 Q`. The
//! variants differ in `W`: Tatebe recurses with one cycle on the coarse level,
//! the recursive multi-scale method runs a full inner PCG there, and on the
//! coarsest level both use the direct solver.

use std::sync::Arc;
use std::time::Instant;

use super::pcg::{pcg_core, polynomial_into, smooth_step, PcgVectors};
use super::report::{EventKind, LevelEvent, LevelStats, SolveReport};
use super::{level_tolerance, Method, SolveParams};
use crate::error::{check_len, Result};
use crate::grid::{axpy, dot_unchecked};
use crate::multiscale::LevelHierarchy;

const MAX_EVENTS: usize = 1 << 20;

/// Work vectors of one level. `rhs` and `sol` carry the restricted residual
/// and the coarse correction and are empty on level 0, where the caller's
/// `b` and `x` take their place.
#[derive(Debug, Clone, Default)]
struct LevelWork {
    rhs: Vec<f64>,
    sol: Vec<f64>,
    r: Vec<f64>,
    p: Vec<f64>,
    z: Vec<f64>,
    t: Vec<f64>,
    q: Vec<f64>,
}

impl LevelWork {
    fn new(n: usize, coarse: bool) -> Self {
        let io = if coarse { n } else { 0 };
        Self {
            rhs: vec![0.0; io],
            sol: vec![0.0; io],
            r: vec![0.0; n],
            p: vec![0.0; n],
            z: vec![0.0; n],
            t: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

struct Ctx<'h> {
    h: &'h LevelHierarchy,
    params: SolveParams,
    method: Method,
    iterations: Vec<u64>,
    events: Vec<LevelEvent>,
    dropped: usize,
    inner_failures: usize,
    start: Instant,
}

impl<'h> Ctx<'h> {
    fn new(h: &'h LevelHierarchy, params: SolveParams, method: Method) -> Self {
        Ctx {
            h,
            params,
            method,
            iterations: vec![0; h.num_levels()],
            events: Vec::new(),
            dropped: 0,
            inner_failures: 0,
            start: Instant::now(),
        }
    }

    fn event(&mut self, kind: EventKind, level: usize, iterations: Option<usize>) {
        if !self.params.record_events {
            return;
        }
        if self.events.len() >= MAX_EVENTS || self.dropped > 0 {
            self.dropped += 1;
            return;
        }
        self.events.push(LevelEvent {
            kind,
            level,
            time_s: self.start.elapsed().as_secs_f64(),
            iterations,
        });
    }

    fn m(&self, k: usize) -> usize {
        self.params.m.unwrap_or(self.h.levels[k].m)
    }

    fn last(&self) -> usize {
        self.h.num_levels() - 1
    }
}

/// `z = M_k^-1 v` using `t` as scratch and `rest` for the coarser levels.
fn precondition(
    ctx: &mut Ctx<'_>,
    k: usize,
    v: &[f64],
    z: &mut [f64],
    t: &mut [f64],
    rest: &mut [LevelWork],
) -> Result<()> {
    if ctx.method == Method::Polynomial {
        let s = ctx.h.splitting_at(k);
        polynomial_into(&s, ctx.m(k), v, z, t);
        return Ok(());
    }
    if k == ctx.last() {
        z.copy_from_slice(v);
        ctx.h.coarsest.solve_in_place(z);
        return Ok(());
    }
    let h = ctx.h;
    let s = h.splitting_at(k);
    let m = ctx.m(k);
    z.iter_mut().for_each(|x| *x = 0.0);
    for step in 0..m {
        smooth_step(&s, v, z, t, step == 0);
    }
    s.op.residual_into(z, v, t);
    let transfer = h.levels[k]
        .transfer
        .as_ref()
        .expect("non-coarsest level has a transfer");
    let (next, deeper) = rest.split_first_mut().expect("work for every level");
    transfer.restrict_into(t, &mut next.rhs);
    coarse_solve(ctx, k + 1, next, deeper)?;
    transfer.prolongate_add(&next.sol, z);
    for _ in 0..m {
        smooth_step(&s, v, z, t, false);
    }
    Ok(())
}

/// Fill `w.sol` with the level-`k` coarse correction for `w.rhs`.
fn coarse_solve(
    ctx: &mut Ctx<'_>,
    k: usize,
    w: &mut LevelWork,
    rest: &mut [LevelWork],
) -> Result<()> {
    let LevelWork {
        rhs,
        sol,
        r,
        p,
        z,
        t,
        q,
    } = w;
    if k == ctx.last() {
        ctx.event(EventKind::Enter, k, None);
        sol.copy_from_slice(rhs);
        ctx.h.coarsest.solve_in_place(sol);
        ctx.iterations[k] += 1;
        ctx.event(EventKind::Leave, k, Some(1));
        return Ok(());
    }
    match ctx.method {
        Method::RecursiveMs => {
            let n = rhs.len();
            let floor =
                ctx.params.relative_floor * ctx.params.relative_floor * dot_unchecked(rhs, rhs);
            let threshold = level_tolerance(k, &ctx.params, n).max(floor);
            sol.iter_mut().for_each(|x| *x = 0.0);
            ctx.event(EventKind::Enter, k, None);
            let op = &ctx.h.levels[k].operator;
            let max = ctx.params.max_iterations;
            let v = PcgVectors { r, p, z, q };
            let out = pcg_core(
                op,
                rhs,
                sol,
                v,
                |rv, zv| precondition(ctx, k, rv, zv, t, rest),
                threshold,
                max,
            )?;
            ctx.iterations[k] += out.iterations as u64;
            if !out.converged {
                ctx.inner_failures += 1;
            }
            ctx.event(EventKind::Leave, k, Some(out.iterations));
        }
        _ => {
            ctx.event(EventKind::Enter, k, None);
            precondition(ctx, k, rhs, sol, t, rest)?;
            ctx.iterations[k] += 1;
            ctx.event(EventKind::Leave, k, Some(1));
        }
    }
    Ok(())
}

/// Solver bound to a hierarchy, a method and parameters. Work vectors are
/// allocated once and reused by every solve.
pub struct Solver {
    hierarchy: Arc<LevelHierarchy>,
    method: Method,
    params: SolveParams,
    work: Vec<LevelWork>,
}

impl Solver {
    pub fn new(
        hierarchy: Arc<LevelHierarchy>,
        method: Method,
        params: SolveParams,
    ) -> Result<Self> {
        params.validate()?;
        let work = hierarchy
            .levels
            .iter()
            .enumerate()
            .map(|(k, l)| LevelWork::new(l.grid.len(), k > 0))
            .collect();
        Ok(Self {
            hierarchy,
            method,
            params,
            work,
        })
    }

    pub fn hierarchy(&self) -> &LevelHierarchy {
        &self.hierarchy
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &SolveParams {
        &self.params
    }

    pub fn set_params(&mut self, params: SolveParams) -> Result<()> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    /// `M_0^-1 v` for the configured method (standard multigrid uses the
    /// Tatebe sweep). Meant for dense reconstruction on small problems.
    pub fn apply_preconditioner(&mut self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.hierarchy.levels[0].grid.len(), v.len())?;
        let mut ctx = Ctx::new(&self.hierarchy, self.params, self.method);
        ctx.params.record_events = false;
        let (fine, rest) = self.work.split_first_mut().expect("at least one level");
        let mut z = vec![0.0; v.len()];
        precondition(&mut ctx, 0, v, &mut z, &mut fine.t, rest)?;
        Ok(z)
    }

    /// Solve `A_0 x = b` starting from the contents of `x`.
    pub fn solve(&mut self, b: &[f64], x: &mut [f64]) -> Result<SolveReport> {
        let n = self.hierarchy.levels[0].grid.len();
        check_len(n, b.len())?;
        check_len(n, x.len())?;
        let h = Arc::clone(&self.hierarchy);
        let mut ctx = Ctx::new(&h, self.params, self.method);
        let (fine, rest) = self.work.split_first_mut().expect("at least one level");
        let op = &h.levels[0].operator;
        let threshold = level_tolerance(0, &ctx.params, n);
        let mut diverged = false;

        ctx.event(EventKind::Enter, 0, None);
        let (iterations, converged) = match ctx.method {
            Method::StandardMultigrid => {
                let LevelWork { r, z, t, .. } = fine;
                op.residual_into(x, b, r);
                let r0 = dot_unchecked(r, r);
                let limit = r0 * ctx.params.divergence_factor * ctx.params.divergence_factor;
                let mut rr = r0;
                let mut it = 0;
                while !(rr < threshold || rr == 0.0) && it < ctx.params.max_iterations {
                    precondition(&mut ctx, 0, r, z, t, rest)?;
                    axpy(1.0, z, x);
                    op.residual_into(x, b, r);
                    rr = dot_unchecked(r, r);
                    it += 1;
                    if !rr.is_finite() || rr > limit {
                        diverged = true;
                        break;
                    }
                }
                (it, rr < threshold || rr == 0.0)
            }
            _ => {
                let LevelWork { r, p, z, t, q, .. } = fine;
                let v = PcgVectors { r, p, z, q };
                let max = ctx.params.max_iterations;
                let out = pcg_core(
                    op,
                    b,
                    x,
                    v,
                    |rv, zv| precondition(&mut ctx, 0, rv, zv, t, rest),
                    threshold,
                    max,
                )?;
                (out.iterations, out.converged)
            }
        };
        ctx.iterations[0] = iterations as u64;
        ctx.event(EventKind::Leave, 0, Some(iterations));
        let wall = ctx.start.elapsed().as_secs_f64();

        fine.r.iter_mut().for_each(|v| *v = 0.0);
        op.residual_into(x, b, &mut fine.r);
        let final_rms = (dot_unchecked(&fine.r, &fine.r) / n as f64).sqrt();

        let flop_proxy: u64 = ctx
            .iterations
            .iter()
            .zip(&h.levels)
            .map(|(i, l)| i * l.grid.len() as u64)
            .sum();
        let levels = ctx
            .iterations
            .iter()
            .zip(&h.levels)
            .enumerate()
            .map(|(k, (&it, l))| {
                let work = it * l.grid.len() as u64;
                LevelStats {
                    level: k,
                    nx: l.grid.nx,
                    ny: l.grid.ny,
                    dimension: l.grid.len(),
                    iterations: it,
                    work,
                    percent: if flop_proxy > 0 {
                        100.0 * work as f64 / flop_proxy as f64
                    } else {
                        0.0
                    },
                }
            })
            .collect();
        Ok(SolveReport {
            method: ctx.method,
            epsilon: ctx.params.epsilon,
            f: ctx.params.f,
            converged,
            diverged,
            inner_failures: ctx.inner_failures,
            fine_iterations: iterations,
            final_rms,
            wall_time_s: wall,
            time_per_point_s: wall / n as f64,
            flop_proxy,
            levels,
            events: ctx.events,
            events_dropped: ctx.dropped,
        })
    }

    /// Solve from a zero initial guess.
    pub fn solve_zero(&mut self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let mut x = vec![0.0; b.len()];
        let report = self.solve(b, &mut x)?;
        Ok((x, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{
        boundary_lift, build_transmissivities, BoundaryCondition, BoundarySpec,
    };
    use crate::grid::{CellField, Grid2D};
    use crate::multiscale::HierarchyParams;
    use crate::solvers::direct::direct_solve;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_k(g: Grid2D, seed: u64, spread: f64) -> CellField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CellField::new(
            g,
            (0..g.len())
                .map(|_| rng.random_range(-spread..spread).exp())
                .collect(),
        )
        .unwrap()
    }

    fn hierarchy(k: &CellField, bc: &BoundarySpec, threshold: usize) -> Arc<LevelHierarchy> {
        let t = build_transmissivities(k, bc).unwrap();
        Arc::new(
            LevelHierarchy::build(
                &t,
                &HierarchyParams {
                    coarsest_threshold: threshold,
                    ..Default::default()
                },
            )
            .unwrap(),
        )
    }

    #[test]
    fn all_methods_solve_small_dirichlet_problem() {
        let g = Grid2D::unit(16, 16).unwrap();
        let k = random_k(g, 5, 1.5);
        let bc = BoundarySpec::uniform(&g, BoundaryCondition::dirichlet(0.0));
        let h = hierarchy(&k, &bc, 20);
        assert!(h.num_levels() >= 2);
        let a = h.levels[0].operator.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = direct_solve(&a, g.len(), &b).unwrap();
        for method in Method::ALL {
            let params = SolveParams {
                epsilon: 1e-11,
                max_iterations: 200,
                ..Default::default()
            };
            let mut s = Solver::new(h.clone(), method, params).unwrap();
            let (x, rep) = s.solve_zero(&b).unwrap();
            assert!(rep.converged, "{method}: {rep:?}");
            let err = x
                .iter()
                .zip(&exact)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "{method}: {err}");
            assert!(rep.events_nested());
        }
    }

    #[test]
    fn single_level_hierarchy_is_direct() {
        let g = Grid2D::unit(6, 5).unwrap();
        let k = random_k(g, 2, 1.0);
        let bc = BoundarySpec::channel(&g, 1.0, 0.0);
        let p = boundary_lift(&k, &bc, None).unwrap();
        let h = Arc::new(
            LevelHierarchy::build(&p.transmissivity, &HierarchyParams::default()).unwrap(),
        );
        assert_eq!(h.num_levels(), 1);
        for method in [Method::RecursiveMs, Method::Tatebe] {
            let mut s = Solver::new(
                h.clone(),
                method,
                SolveParams {
                    epsilon: 1e-12,
                    ..Default::default()
                },
            )
            .unwrap();
            let (_, rep) = s.solve_zero(&p.source).unwrap();
            assert_eq!(rep.fine_iterations, 1);
            assert!(rep.converged);
        }
    }

    #[test]
    fn zero_rhs_is_immediate() {
        let g = Grid2D::unit(20, 20).unwrap();
        let bc = BoundarySpec::uniform(&g, BoundaryCondition::dirichlet(0.0));
        let h = hierarchy(&CellField::constant(g, 1.0), &bc, 64);
        for method in Method::ALL {
            let mut s = Solver::new(h.clone(), method, SolveParams::default()).unwrap();
            let (x, rep) = s.solve_zero(&vec![0.0; g.len()]).unwrap();
            assert_eq!(rep.fine_iterations, 0);
            assert!(x.iter().all(|&v| v == 0.0));
            assert!(rep.converged);
        }
    }

    #[test]
    fn report_table_and_work_accounting() {
        let g = Grid2D::unit(64, 64).unwrap();
        let bc = BoundarySpec::channel(&g, 1.0, 0.0);
        let k = random_k(g, 9, 1.0);
        let p = boundary_lift(&k, &bc, None).unwrap();
        let h = Arc::new(
            LevelHierarchy::build(
                &p.transmissivity,
                &HierarchyParams {
                    coarsest_threshold: 16,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let mut s = Solver::new(
            h.clone(),
            Method::RecursiveMs,
            SolveParams {
                epsilon: 1e-8,
                ..Default::default()
            },
        )
        .unwrap();
        let (_, rep) = s.solve_zero(&p.source).unwrap();
        assert!(rep.converged);
        let total: u64 = rep.levels.iter().map(|l| l.work).sum();
        assert_eq!(total, rep.flop_proxy);
        let pct: f64 = rep.levels.iter().map(|l| l.percent).sum();
        assert!((pct - 100.0).abs() < 1e-9);
        assert!(rep.levels.iter().all(|l| l.iterations > 0));
        assert!(rep.events_nested());
        assert!(rep.level_table().lines().count() == h.num_levels() + 1);
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["levels"][0]["dimension"] == 4096);
        assert!(json["events"].as_array().unwrap().len() >= 4);
    }

    #[test]
    fn repeated_solves_are_deterministic() {
        let g = Grid2D::unit(40, 40).unwrap();
        let bc = BoundarySpec::channel(&g, 1.0, 0.0);
        let p = boundary_lift(&random_k(g, 4, 2.0), &bc, None).unwrap();
        let h = Arc::new(
            LevelHierarchy::build(
                &p.transmissivity,
                &HierarchyParams {
                    coarsest_threshold: 16,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let mut s = Solver::new(h, Method::RecursiveMs, SolveParams::default()).unwrap();
        let (x1, r1) = s.solve_zero(&p.source).unwrap();
        let (x2, r2) = s.solve_zero(&p.source).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(r1.levels, r2.levels);
    }
}
