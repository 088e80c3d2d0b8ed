use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mscg::harness::{fit_accuracy, run_experiment, Experiment, ExperimentConfig, SideCondition};
use mscg::{Interpolation, Method, SplittingKind};

#[derive(Parser)]
#[command(
    name = "mscg",
    version,
    about = "Recursive multi-scale CG experiments for 2-D porous flow"
)]
struct Cli {
    /// Key-value (TOML) config file; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single solve of the configured problem with per-level table and trace.
    Base(Overrides),
    /// Iterations and time per point over a family of grid sizes.
    Scaling(Overrides),
    /// Error against a manufactured exact solution while tightening the tolerance.
    Accuracy(Overrides),
    /// Iterations against the variance of the log-permeability.
    Variance(Overrides),
    /// Anisotropic strip with and without semi-coarsening.
    Channel(Overrides),
    /// All preconditioners on the same problem.
    Compare(Overrides),
    /// Print the effective configuration and exit.
    ShowConfig(Overrides),
}

#[derive(Args, Default)]
struct Overrides {
    /// Grid as NXxNY (or a single N for a square grid).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Variance of log-permeability.
    #[arg(long)]
    variance: Option<f64>,
    /// Linear coarsening factor between levels.
    #[arg(long)]
    scale: Option<f64>,
    /// Per-level tolerance tightening factor.
    #[arg(long)]
    f: Option<f64>,
    /// Absolute RMS residual target on the finest level.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Reduction of |r|^2/N (used when no epsilon is given).
    #[arg(long)]
    reduction: Option<f64>,
    /// Smoothing degree for every level.
    #[arg(short, long)]
    m: Option<usize>,
    /// recursive-ms, tatebe, polynomial or standard-multigrid.
    #[arg(long, short = 'p')]
    preconditioner: Option<Method>,
    /// sgs or jacobi.
    #[arg(long)]
    splitting: Option<SplittingKind>,
    /// linear or constant.
    #[arg(long)]
    interpolation: Option<Interpolation>,
    #[arg(long)]
    semi_coarsen: Option<bool>,
    /// neumann or dirichlet on the top and bottom sides.
    #[arg(long, value_parser = parse_side)]
    top_bottom: Option<SideCondition>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Comma-separated scaling sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Comma-separated variances for the variance study.
    #[arg(long, value_delimiter = ',')]
    variances: Option<Vec<f64>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
}

fn parse_side(s: &str) -> Result<SideCondition, String> {
    match s {
        "neumann" | "no-flow" => Ok(SideCondition::Neumann),
        "dirichlet" => Ok(SideCondition::Dirichlet),
        _ => Err(format!("expected neumann or dirichlet, got '{s}'")),
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(['x', 'X']).unwrap_or((s, s));
    Ok((
        a.trim().parse().context("grid nx")?,
        b.trim().parse().context("grid ny")?,
    ))
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(g) = self.grid {
            let (nx, ny) = parse_grid(&g)?;
            if cfg.experiment == Experiment::Channel {
                (cfg.channel_nx, cfg.channel_ny) = (nx, ny);
            } else {
                (cfg.nx, cfg.ny) = (nx, ny);
            }
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        set!(
            seed,
            variance,
            scale,
            f,
            reduction,
            preconditioner,
            splitting,
            interpolation,
            semi_coarsen,
            top_bottom,
            max_iterations,
            sizes,
            variances,
            repeats
        );
        if self.epsilon.is_some() {
            cfg.epsilon = self.epsilon;
        }
        if self.m.is_some() {
            cfg.m = self.m;
        }
        if self.output_dir.is_some() {
            cfg.output_dir = self.output_dir;
        }
        Ok(())
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    let (kind, overrides) = match cli.command {
        Command::Base(o) => (Some(Experiment::Base), o),
        Command::Scaling(o) => (Some(Experiment::Scaling), o),
        Command::Accuracy(o) => (Some(Experiment::Accuracy), o),
        Command::Variance(o) => (Some(Experiment::Variance), o),
        Command::Channel(o) => (Some(Experiment::Channel), o),
        Command::Compare(o) => (Some(Experiment::Compare), o),
        Command::ShowConfig(o) => (None, o),
    };
    if let Some(k) = kind {
        cfg.experiment = k;
    }
    overrides.apply(&mut cfg)?;
    cfg.validate()?;
    if kind.is_none() {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }

    let out = run_experiment(&cfg)?;
    println!(
        "{:<28} {:>11} {:>20} {:>6} {:>9} {:>12} {:>12}",
        "label", "grid", "method", "iters", "converged", "time/point", "flop proxy"
    );
    for r in &out.rows {
        println!(
            "{:<28} {:>11} {:>20} {:>6} {:>9} {:>12.3e} {:>12}",
            r.label,
            format!("{}x{}", r.nx, r.ny),
            r.method,
            r.fine_iterations,
            r.converged,
            r.time_per_point_s,
            r.flop_proxy
        );
    }
    if cfg.experiment == Experiment::Base {
        if let Some((_, rep)) = out.solves.first() {
            print!("{}", rep.level_table());
        }
    }
    if cfg.experiment == Experiment::Accuracy {
        if let Some(fit) = fit_accuracy(&out.rows) {
            println!(
                "fit over {} points: {:.2} iterations per digit, R^2 = {:.4}, contraction {:.2} per iteration",
                fit.points, fit.slope, fit.r_squared, fit.contraction
            );
        }
    }
    if let Some(dir) = &cfg.output_dir {
        println!("outputs written to {}", dir.display());
    }
    Ok(())
}
