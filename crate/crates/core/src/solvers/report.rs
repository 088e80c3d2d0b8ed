use serde::{Deserialize, Serialize};

use super::Method;

/// One row of the per-level work table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub nx: usize,
    pub ny: usize,
    pub dimension: usize,
    /// PCG iterations on this level; direct solves on the coarsest level;
    /// preconditioner sweeps on coarse levels of Tatebe and standard multigrid.
    pub iterations: u64,
    pub work: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Enter,
    Leave,
}

/// A level transition. `iterations` is set on `Leave` events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelEvent {
    pub kind: EventKind,
    pub level: usize,
    pub time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub epsilon: f64,
    pub f: f64,
    pub converged: bool,
    /// Standard multigrid stopped because the residual grew.
    pub diverged: bool,
    /// Inner solves that hit the iteration cap.
    pub inner_failures: usize,
    pub fine_iterations: usize,
    pub final_rms: f64,
    pub wall_time_s: f64,
    pub time_per_point_s: f64,
    /// `sum_k iterations_k * N_k`.
    pub flop_proxy: u64,
    pub levels: Vec<LevelStats>,
    pub events: Vec<LevelEvent>,
    /// Events beyond the recording cap that were dropped.
    pub events_dropped: usize,
}

impl SolveReport {
    /// Share of the flop proxy spent on level 0, in `[0, 1]`.
    pub fn fine_share(&self) -> f64 {
        if self.flop_proxy == 0 {
            return 0.0;
        }
        self.levels
            .first()
            .map_or(0.0, |l| l.work as f64 / self.flop_proxy as f64)
    }

    /// Plain-text table in the usual level / grid / dimension / iterations /
    /// work / percent layout.
    pub fn level_table(&self) -> String {
        let mut s = format!(
            "{:>5} {:>11} {:>10} {:>10} {:>14} {:>8}\n",
            "level", "grid", "dimension", "iterations", "iter x dim", "percent"
        );
        for l in &self.levels {
            s.push_str(&format!(
                "{:>5} {:>11} {:>10} {:>10} {:>14} {:>7.2}%\n",
                l.level,
                format!("{}x{}", l.nx, l.ny),
                l.dimension,
                l.iterations,
                l.work,
                l.percent
            ));
        }
        s
    }

    /// True when every `Enter` has a matching `Leave` at the same level and
    /// transitions nest.
    pub fn events_nested(&self) -> bool {
        let mut stack = Vec::new();
        for e in &self.events {
            match e.kind {
                EventKind::Enter => stack.push(e.level),
                EventKind::Leave => {
                    if stack.pop() != Some(e.level) {
                        return false;
                    }
                }
            }
        }
        stack.is_empty() || self.events_dropped > 0
    }
}
