use std::fs;
use std::path::Path;

use log::info;

use super::config::{Experiment, ExperimentConfig, ScalingFamily};
use super::report::{StudyOutput, StudyRow};
use super::{boundary_for, make_exact_test_problem, Problem};
use crate::error::{Error, Result};
use crate::field::{
    export_field, extract_subgrid, generate_lognormal_field, interpolate_to_grid,
    rescale_log_variance, FieldFormat,
};
use crate::grid::{max_abs, rms_residual, CellField, Grid2D};
use crate::solvers::{Method, SolveReport};

/// Fields up to this many cells are also dumped as CSV.
const CSV_DUMP_LIMIT: usize = 65_536;

fn square(cfg: &ExperimentConfig, n: usize) -> Result<Grid2D> {
    Grid2D::new(n, n, cfg.cell_size, cfg.cell_size)
}

fn k_ratio(k: &CellField) -> f64 {
    let (lo, hi) = k.min_max();
    hi / lo
}

fn log_variance(k: &CellField) -> f64 {
    crate::field::log_stats(k).map(|s| s.1).unwrap_or(0.0)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, s)?;
    Ok(())
}

/// Write the study CSV and every solve report under the output directory.
fn write_outputs(cfg: &ExperimentConfig, name: &str, out: &StudyOutput) -> Result<()> {
    let Some(dir) = cfg.output_dir.as_deref() else {
        return Ok(());
    };
    ensure_dir(dir)?;
    out.write_csv(&dir.join(format!("{name}.csv")))?;
    for (label, rep) in &out.solves {
        write_json(&dir.join(format!("{name}_{label}_solve.json")), rep)?;
    }
    if let Some(h) = &out.hierarchy {
        write_json(&dir.join(format!("{name}_hierarchy.json")), h)?;
    }
    Ok(())
}

fn dump_field(cfg: &ExperimentConfig, stem: &str, field: &CellField) -> Result<()> {
    let Some(dir) = cfg.output_dir.as_deref() else {
        return Ok(());
    };
    if !cfg.export_fields {
        return Ok(());
    }
    ensure_dir(dir)?;
    export_field(field, &dir.join(format!("{stem}.bin")), FieldFormat::Binary)?;
    if field.grid.len() <= CSV_DUMP_LIMIT {
        export_field(field, &dir.join(format!("{stem}.csv")), FieldFormat::Csv)?;
    }
    Ok(())
}

/// Solve `repeats` times and keep the fastest run; returns the row, the
/// report and the lifted solution.
fn solve_row(
    study: &str,
    label: &str,
    p: &Problem,
    cfg: &ExperimentConfig,
    method: Method,
) -> Result<(StudyRow, SolveReport, Vec<f64>)> {
    let params = cfg.solve_params(p.rhs_rms());
    let mut best: Option<(Vec<f64>, SolveReport)> = None;
    for _ in 0..cfg.repeats {
        let (x, rep) = p.solve(method, params)?;
        if best
            .as_ref()
            .is_none_or(|b| rep.wall_time_s < b.1.wall_time_s)
        {
            best = Some((x, rep));
        }
    }
    let (x, rep) = best.expect("at least one repeat");
    let g = p.grid();
    let row = StudyRow::from_report(
        study,
        label,
        g.nx,
        g.ny,
        log_variance(&p.permeability),
        k_ratio(&p.permeability),
        &rep,
    );
    info!(
        "{study} {label}: {}x{} {} iterations={} converged={} time/point={:.3e}s",
        g.nx, g.ny, method, rep.fine_iterations, rep.converged, rep.time_per_point_s
    );
    Ok((row, rep, x))
}

/// Base case: configured field and boundaries, one solve with the configured
/// preconditioner; exports the pressure and log-permeability fields.
pub fn run_base_case(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let p = Problem::generate(
        cfg,
        Grid2D::new(cfg.nx, cfg.ny, cfg.cell_size, cfg.cell_size)?,
    )?;
    let (row, rep, delta) = solve_row("base", "base", &p, cfg, cfg.preconditioner)?;
    info!("levels:\n{}", rep.level_table());
    let pressure = p.lifted.reconstruct(&delta)?;
    dump_field(cfg, "base_pressure", &pressure)?;
    dump_field(cfg, "base_log_permeability", &p.permeability.map(f64::ln))?;
    let out = StudyOutput {
        rows: vec![row],
        solves: vec![("base".into(), rep)],
        hierarchy: Some(p.hierarchy.summary()),
    };
    write_outputs(cfg, "base", &out)?;
    Ok(out)
}

/// One field on the largest grid; smaller problems are either lower-left
/// truncations of it or resampled versions over the same domain. Recursive
/// multi-scale and Tatebe rows per size.
pub fn run_scaling_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let largest = *cfg.sizes.iter().max().expect("validated non-empty");
    let fine = generate_lognormal_field(square(cfg, largest)?, &cfg.correlation()?, cfg.seed)?;
    let mut out = StudyOutput::default();
    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    for n in sizes {
        let k = match cfg.family {
            ScalingFamily::Truncation => extract_subgrid(&fine, n, n)?,
            ScalingFamily::Interpolation => {
                let h = fine.grid.width() / n as f64;
                let coarse = interpolate_to_grid(&fine, Grid2D::new(n, n, h, h)?)?;
                rescale_log_variance(&coarse, cfg.variance)?
            }
        };
        let bc = boundary_for(&k.grid, cfg.p_left, cfg.p_right, cfg.top_bottom);
        let p = Problem::new(k, bc, &cfg.hierarchy_params())?;
        for method in [Method::RecursiveMs, Method::Tatebe] {
            let label = format!("{n}-{}", method.name());
            let (row, rep, _) = solve_row("scaling", &label, &p, cfg, method)?;
            out.rows.push(row);
            out.solves.push((label, rep));
        }
    }
    write_outputs(cfg, "scaling", &out)?;
    Ok(out)
}

/// Build an exactly solvable problem from a crude solve of the base case and
/// sweep the tolerance, recording the error against the known solution.
pub fn run_accuracy_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let p = Problem::generate(
        cfg,
        Grid2D::new(cfg.nx, cfg.ny, cfg.cell_size, cfg.cell_size)?,
    )?;
    let crude = ExperimentConfig {
        reduction: cfg.crude_reduction,
        epsilon: None,
        ..cfg.clone()
    };
    let (x_crude, _) = p.solve(cfg.preconditioner, crude.solve_params(p.rhs_rms()))?;
    let (b, x_true) = make_exact_test_problem(p.operator(), &p.lifted.source, &x_crude)?;
    let b_rms = rms_residual(&b)?;
    let x_rms = rms_residual(&x_true)?;
    let g = p.grid();
    let mut out = StudyOutput::default();
    for &reduction in &cfg.accuracy_reductions {
        let run = ExperimentConfig {
            reduction,
            epsilon: None,
            ..cfg.clone()
        };
        let (x, rep) = p.solve_rhs(&b, cfg.preconditioner, run.solve_params(b_rms))?;
        let e: Vec<f64> = x.iter().zip(&x_true).map(|(a, t)| a - t).collect();
        let rms = rms_residual(&e)?;
        let label = format!("{reduction:e}");
        let mut row = StudyRow::from_report(
            "accuracy",
            &label,
            g.nx,
            g.ny,
            log_variance(&p.permeability),
            k_ratio(&p.permeability),
            &rep,
        );
        row.rms_error = Some(rms);
        row.max_error = Some(max_abs(&e));
        row.relative_rms_error = Some(rms / x_rms);
        info!(
            "accuracy {label}: iterations={} rms error={rms:.3e}",
            rep.fine_iterations
        );
        out.rows.push(row);
        out.solves.push((label, rep));
    }
    write_outputs(cfg, "accuracy", &out)?;
    Ok(out)
}

/// The configured field rescaled to each variance in turn (same seed).
pub fn run_variance_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let grid = Grid2D::new(cfg.nx, cfg.ny, cfg.cell_size, cfg.cell_size)?;
    let base_spec = crate::field::CorrelationSpec {
        log_variance: 1.0,
        ..cfg.correlation()?
    };
    let base = generate_lognormal_field(grid, &base_spec, cfg.seed)?;
    let bc = boundary_for(&grid, cfg.p_left, cfg.p_right, cfg.top_bottom);
    let mut out = StudyOutput::default();
    for &v in &cfg.variances {
        let k = rescale_log_variance(&base, v)?;
        let p = Problem::new(k, bc.clone(), &cfg.hierarchy_params())?;
        let label = format!("{v}");
        let (mut row, rep, _) = solve_row("variance", &label, &p, cfg, cfg.preconditioner)?;
        row.variance = v;
        out.rows.push(row);
        out.solves.push((label, rep));
    }
    write_outputs(cfg, "variance", &out)?;
    Ok(out)
}

/// Strip of anisotropic cells (`dx = aspect * dy`), solved with and without
/// semi-coarsening.
pub fn run_channel_case(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let grid = Grid2D::new(
        cfg.channel_nx,
        cfg.channel_ny,
        cfg.channel_aspect * cfg.cell_size,
        cfg.cell_size,
    )?;
    let k = generate_lognormal_field(grid, &cfg.correlation()?, cfg.seed)?;
    let bc = boundary_for(&grid, cfg.p_left, cfg.p_right, cfg.top_bottom);
    let mut out = StudyOutput::default();
    for semi in [true, false] {
        let hp = crate::multiscale::HierarchyParams {
            semi_coarsen: semi,
            ..cfg.hierarchy_params()
        };
        let p = Problem::new(k.clone(), bc.clone(), &hp)?;
        let label = if semi {
            "semi-coarsening"
        } else {
            "uniform-coarsening"
        };
        let (row, rep, _) = solve_row("channel", label, &p, cfg, cfg.preconditioner)?;
        info!("{label} levels:\n{}", rep.level_table());
        if semi {
            out.hierarchy = Some(p.hierarchy.summary());
        }
        out.rows.push(row);
        out.solves.push((label.to_string(), rep));
    }
    write_outputs(cfg, "channel", &out)?;
    Ok(out)
}

/// Every method on the same base-case problem.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let p = Problem::generate(
        cfg,
        Grid2D::new(cfg.nx, cfg.ny, cfg.cell_size, cfg.cell_size)?,
    )?;
    let mut out = StudyOutput {
        hierarchy: Some(p.hierarchy.summary()),
        ..Default::default()
    };
    for method in Method::ALL {
        let (row, rep, _) = solve_row("compare", method.name(), &p, cfg, method)?;
        out.rows.push(row);
        out.solves.push((method.name().to_string(), rep));
    }
    write_outputs(cfg, "compare", &out)?;
    Ok(out)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Base => run_base_case(cfg),
        Experiment::Scaling => run_scaling_study(cfg),
        Experiment::Accuracy => run_accuracy_study(cfg),
        Experiment::Variance => run_variance_study(cfg),
        Experiment::Channel => run_channel_case(cfg),
        Experiment::Compare => run_comparison(cfg),
    }
}
