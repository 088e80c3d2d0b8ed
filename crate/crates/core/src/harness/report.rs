use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiscale::HierarchySummary;
use crate::solvers::SolveReport;

/// One solve in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: String,
    pub label: String,
    pub nx: usize,
    pub ny: usize,
    pub points: usize,
    pub variance: f64,
    pub k_ratio: f64,
    pub method: String,
    pub levels: usize,
    pub epsilon: f64,
    pub fine_iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub time_per_point_s: f64,
    pub flop_proxy: u64,
    pub fine_share: f64,
    pub final_rms: f64,
    pub rms_error: Option<f64>,
    pub max_error: Option<f64>,
    pub relative_rms_error: Option<f64>,
}

impl StudyRow {
    pub fn from_report(
        study: &str,
        label: &str,
        nx: usize,
        ny: usize,
        variance: f64,
        k_ratio: f64,
        rep: &SolveReport,
    ) -> Self {
        Self {
            study: study.to_string(),
            label: label.to_string(),
            nx,
            ny,
            points: nx * ny,
            variance,
            k_ratio,
            method: rep.method.name().to_string(),
            levels: rep.levels.len(),
            epsilon: rep.epsilon,
            fine_iterations: rep.fine_iterations,
            converged: rep.converged,
            diverged: rep.diverged,
            time_per_point_s: rep.time_per_point_s,
            flop_proxy: rep.flop_proxy,
            fine_share: rep.fine_share(),
            final_rms: rep.final_rms,
            rms_error: None,
            max_error: None,
            relative_rms_error: None,
        }
    }
}

/// Everything a study produces.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StudyOutput {
    pub rows: Vec<StudyRow>,
    /// Labelled solve reports (per-level table and level-transition trace).
    pub solves: Vec<(String, SolveReport)>,
    pub hierarchy: Option<HierarchySummary>,
}

impl StudyOutput {
    pub fn row(&self, label: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn solve(&self, label: &str) -> Option<&SolveReport> {
        self.solves.iter().find(|(l, _)| l == label).map(|(_, r)| r)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows_csv(&self.rows, path)
    }
}

pub fn write_rows_csv(rows: &[StudyRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<StudyRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

/// Least-squares line `iterations = slope * digits + intercept` where
/// `digits = -log10(relative RMS error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyFit {
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Error reduction per fine iteration, `10^(1 / slope)`.
    pub contraction: f64,
}

/// Fit the accuracy rows up to the round-off floor: converged rows are used
/// in order of tightening tolerance until the error stops improving by at
/// least a factor of two.
pub fn fit_accuracy(rows: &[StudyRow]) -> Option<AccuracyFit> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut last = f64::INFINITY;
    for r in rows.iter().filter(|r| r.converged) {
        let e = r.relative_rms_error?;
        if !(e > 0.0) || e > 0.5 * last {
            break;
        }
        last = e;
        pts.push((-e.log10(), r.fine_iterations as f64));
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(AccuracyFit {
        points: pts.len(),
        slope,
        intercept: my - slope * mx,
        r_squared,
        contraction: 10f64.powf(1.0 / slope),
    })
}
