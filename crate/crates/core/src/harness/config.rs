//! Flat key-value experiment configuration (TOML syntax). Every key has a
//! default reproducing the desk-scale base case; CLI flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CorrelationModel, CorrelationSpec};
use crate::multiscale::{HierarchyParams, Interpolation, MPolicy};
use crate::solvers::{Method, SolveParams};
use crate::splitting::SplittingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Base,
    Scaling,
    Accuracy,
    Variance,
    Channel,
    Compare,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Self::Base),
            "scaling" => Ok(Self::Scaling),
            "accuracy" => Ok(Self::Accuracy),
            "variance" => Ok(Self::Variance),
            "channel" => Ok(Self::Channel),
            "compare" => Ok(Self::Compare),
            other => Err(Error::InvalidArgument(format!(
                "unknown experiment '{other}'"
            ))),
        }
    }
}

/// How the scaling family is derived from one large field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingFamily {
    /// Lower-left subgrids of the largest field: constant correlation length
    /// in cells, variance growing with size.
    #[default]
    Truncation,
    /// Resampled onto coarser grids over the same domain and rescaled to the
    /// configured variance.
    Interpolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SideCondition {
    #[default]
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub nx: usize,
    pub ny: usize,
    /// Cell size (both directions for square cells).
    pub cell_size: f64,
    pub model: CorrelationModel,
    pub cutoff_major: f64,
    pub cutoff_minor: f64,
    pub angle_deg: f64,
    pub log_mean: f64,
    pub variance: f64,
    pub seed: u64,
    pub p_left: f64,
    pub p_right: f64,
    /// Condition on the top and bottom sides. Neumann means no flow;
    /// Dirichlet interpolates linearly between `p_left` and `p_right`.
    pub top_bottom: SideCondition,
    /// Target reduction of `|r|^2 / N` from the zero initial guess.
    pub reduction: f64,
    /// Absolute RMS residual target; overrides `reduction` when set.
    pub epsilon: Option<f64>,
    pub f: f64,
    pub max_iterations: usize,
    pub m: Option<usize>,
    pub relative_floor: f64,
    pub scale: f64,
    pub splitting: SplittingKind,
    pub interpolation: Interpolation,
    pub semi_coarsen: bool,
    pub coarsest_threshold: usize,
    pub preconditioner: Method,
    pub output_dir: Option<PathBuf>,
    pub export_fields: bool,
    /// Scaling study sizes (square grids).
    pub sizes: Vec<usize>,
    pub family: ScalingFamily,
    /// Timing repeats per row; the fastest is reported.
    pub repeats: usize,
    pub variances: Vec<f64>,
    /// Residual reductions swept by the accuracy study.
    pub accuracy_reductions: Vec<f64>,
    /// Reduction of the crude solve used to build the exact test problem.
    pub crude_reduction: f64,
    pub channel_nx: usize,
    pub channel_ny: usize,
    /// Cell aspect `dx / dy` of the channel case.
    pub channel_aspect: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Base,
            nx: 256,
            ny: 256,
            cell_size: 1.0 / 2000.0,
            model: CorrelationModel::PowerLaw,
            cutoff_major: 0.016,
            cutoff_minor: 0.002,
            angle_deg: 15.0,
            log_mean: 0.0,
            variance: 2.0,
            seed: 1,
            p_left: 1.0,
            p_right: 0.0,
            top_bottom: SideCondition::Neumann,
            reduction: 1e10,
            epsilon: None,
            f: 0.1,
            max_iterations: 100,
            m: None,
            relative_floor: 1e-12,
            scale: 4.0,
            splitting: SplittingKind::SymmetricGaussSeidel,
            interpolation: Interpolation::Linear,
            semi_coarsen: false,
            coarsest_threshold: 256,
            preconditioner: Method::RecursiveMs,
            output_dir: None,
            export_fields: true,
            sizes: vec![64, 128, 256, 512, 1024],
            family: ScalingFamily::Truncation,
            repeats: 1,
            variances: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            accuracy_reductions: vec![1e4, 1e6, 1e8, 1e10, 1e12, 1e14, 1e16, 1e18, 1e20, 1e22],
            crude_reduction: 1e4,
            channel_nx: 512,
            channel_ny: 128,
            channel_aspect: 10.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(s).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.channel_nx == 0 || self.channel_ny == 0 {
            return Err(Error::InvalidArgument(
                "grid dimensions must be positive".into(),
            ));
        }
        if !(self.cell_size > 0.0) || !(self.channel_aspect > 0.0) {
            return Err(Error::InvalidArgument(
                "cell size and channel aspect must be positive".into(),
            ));
        }
        if !(self.reduction > 1.0) || !(self.crude_reduction > 1.0) {
            return Err(Error::InvalidArgument("reductions must exceed 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "scaling sizes must be non-empty and positive".into(),
            ));
        }
        if self.variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "variances must be non-negative".into(),
            ));
        }
        self.correlation()?;
        self.solve_params(1.0).validate()?;
        Ok(())
    }

    pub fn correlation(&self) -> Result<CorrelationSpec> {
        CorrelationSpec::from_cutoffs(
            self.model,
            self.cutoff_major,
            self.cutoff_minor,
            self.angle_deg.to_radians(),
            self.log_mean,
            self.variance,
        )
    }

    pub fn hierarchy_params(&self) -> HierarchyParams {
        HierarchyParams {
            scale: self.scale,
            m_policy: MPolicy::ScaleFactor,
            coarsest_threshold: self.coarsest_threshold,
            splitting: self.splitting,
            interpolation: self.interpolation,
            semi_coarsen: self.semi_coarsen,
            ..Default::default()
        }
    }

    /// Solver parameters for a right-hand side with RMS `rhs_rms`.
    pub fn solve_params(&self, rhs_rms: f64) -> SolveParams {
        SolveParams {
            epsilon: self.epsilon.unwrap_or(rhs_rms / self.reduction.sqrt()),
            f: self.f,
            max_iterations: self.max_iterations,
            m: self.m,
            relative_floor: self.relative_floor,
            ..Default::default()
        }
    }
}
