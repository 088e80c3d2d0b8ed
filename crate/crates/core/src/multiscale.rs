//! Coarse grid selection, transmissivity coarse graining, inter-grid transfer
//! and the level hierarchy.
//!
//! Level 0 is the finest grid. Every coarse operator is re-assembled from
//! coarse-grained transmissivities (not from `R A E`), so the 5-point form is
//! preserved on every level.

use serde::{Deserialize, Serialize};

use crate::discretization::{assemble_operator, StencilOperator};
use crate::error::{check_len, Error, Result};
use crate::grid::{FaceField, Grid2D};
use crate::solvers::direct::DenseCholesky;
use crate::splitting::{Splitting, SplittingKind};

/// Coarse cell count along one axis for a nominal linear factor `factor`.
///
/// The count is chosen so that the whole chain down to the coarsest grid uses
/// one uniform effective factor: with `L` the number of full coarsenings that
/// fit, the coarsest count is `round(n / factor^L)` and every level in between
/// is `n / s_eff^k` rounded. For 1001 cells and factor 4 this yields
/// 252, 63, 16, 4.
pub fn coarse_count(n: usize, factor: f64) -> usize {
    if n <= 1 || factor <= 1.0 + 1e-12 {
        return n;
    }
    let nf = n as f64;
    let mut levels = 0i32;
    while factor.powi(levels + 1) <= nf * (1.0 + 1e-12) {
        levels += 1;
    }
    if levels == 0 {
        return 1;
    }
    let coarsest = (nf / factor.powi(levels)).round().max(1.0);
    let s_eff = (nf / coarsest).powf(1.0 / levels as f64);
    ((nf / s_eff).round() as usize).clamp(1, n)
}

/// One coarsening step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseStep {
    pub grid: Grid2D,
    /// Realised linear factors `fine.n / coarse.n` per axis.
    pub factor_x: f64,
    pub factor_y: f64,
}

/// Pick the next coarser grid over the same physical extent.
///
/// Without semi-coarsening both axes shrink by `scale`. With it, `aspect` is
/// the effective cell aspect `h_x / h_y` (cell size over the square root of
/// the axis conductivity); the target cell size is `scale` times the smaller
/// effective size and no axis is refined, so strongly anisotropic cells are
/// first coarsened along one axis only.
pub fn choose_coarse_grid(
    fine: &Grid2D,
    scale: f64,
    semi_coarsen: bool,
    aspect: f64,
) -> Result<CoarseStep> {
    if !(scale > 1.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale factor must exceed 1, got {scale}"
        )));
    }
    let (fx, fy) = if semi_coarsen && aspect.is_finite() && aspect > 0.0 {
        // Effective sizes normalised so that h_y = 1.
        let (hx, hy) = (aspect, 1.0);
        let target = hx.min(hy) * scale;
        ((target / hx).max(1.0), (target / hy).max(1.0))
    } else {
        (scale, scale)
    };
    let nx = coarse_count(fine.nx, fx);
    let ny = coarse_count(fine.ny, fy);
    let grid = Grid2D::new(nx, ny, fine.width() / nx as f64, fine.height() / ny as f64)?;
    Ok(CoarseStep {
        grid,
        factor_x: fine.nx as f64 / nx as f64,
        factor_y: fine.ny as f64 / ny as f64,
    })
}

/// Effective cell aspect `h_x / h_y` of an operator: the square root of the
/// ratio of typical y to x couplings (geometric means over open interior faces).
pub fn effective_aspect(t: &FaceField) -> f64 {
    let g = t.grid;
    let gmean = |vals: &mut dyn Iterator<Item = f64>| {
        let (s, c) = vals
            .filter(|v| *v > 0.0)
            .fold((0.0, 0usize), |(s, c), v| (s + v.ln(), c + 1));
        if c == 0 {
            None
        } else {
            Some((s / c as f64).exp())
        }
    };
    let tx = gmean(
        &mut (0..g.ny)
            .flat_map(|j| (1..g.nx).map(move |i| (i, j)))
            .map(|(i, j)| t.tx(i, j)),
    );
    let ty = gmean(
        &mut (1..g.ny)
            .flat_map(|j| (0..g.nx).map(move |i| (i, j)))
            .map(|(i, j)| t.ty(i, j)),
    );
    match (tx, ty) {
        (Some(x), Some(y)) => (y / x).sqrt(),
        _ => 1.0,
    }
}

/// Conductance of a block: series combination of parallel sums,
/// `1 / sum_i w_i / (sum_j h_ij T_ij)`. `columns[i]` lists `(T, height
/// fraction)` pairs and `width_fractions[i]` scales the column's resistance.
pub fn series_of_parallel(columns: &[Vec<(f64, f64)>], width_fractions: &[f64]) -> f64 {
    let mut resistance = 0.0;
    for (col, &w) in columns.iter().zip(width_fractions) {
        let conductance: f64 = col.iter().map(|(t, h)| t * h).sum();
        if conductance <= 0.0 {
            return 0.0;
        }
        resistance += w / conductance;
    }
    if resistance > 0.0 {
        1.0 / resistance
    } else {
        0.0
    }
}

/// Overlap of fine face segments with the coarse path between neighbouring
/// coarse cell centres along one axis: `result[F]` lists `(fine face, width
/// fraction)`. Fine face `f` owns `[x_f - h/2, x_f + h/2]` clipped to the
/// domain; boundary faces own half a cell and already carry the half-cell
/// transmissivity.
fn face_path_overlaps(
    n_fine: usize,
    h_fine: f64,
    n_coarse: usize,
    h_coarse: f64,
) -> Vec<Vec<(usize, f64)>> {
    let len = n_fine as f64 * h_fine;
    let mut out = Vec::with_capacity(n_coarse + 1);
    for cf in 0..=n_coarse {
        let a = ((cf as f64 - 0.5) * h_coarse).max(0.0);
        let b = ((cf as f64 + 0.5) * h_coarse).min(len);
        let lo = ((a / h_fine - 0.5).floor().max(0.0)) as usize;
        let hi = (((b / h_fine + 0.5).ceil()) as usize).min(n_fine);
        let mut list = Vec::new();
        for f in lo..=hi {
            let x = f as f64 * h_fine;
            let s_lo = (x - 0.5 * h_fine).max(0.0);
            let s_hi = (x + 0.5 * h_fine).min(len);
            let own = s_hi - s_lo;
            let o = (b.min(s_hi) - a.max(s_lo)).max(0.0);
            let w = o / own;
            if w > 1e-12 {
                list.push((f, w));
            }
        }
        out.push(list);
    }
    out
}

/// Overlap of fine cells with coarse cells along one axis: `result[C]` lists
/// `(fine cell, fraction of the fine cell inside C)`.
pub(crate) fn cell_overlaps(
    n_fine: usize,
    h_fine: f64,
    n_coarse: usize,
    h_coarse: f64,
) -> Vec<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(n_coarse);
    for c in 0..n_coarse {
        let a = c as f64 * h_coarse;
        let b = (c + 1) as f64 * h_coarse;
        let lo = ((a / h_fine).floor().max(0.0)) as usize;
        let hi = ((b / h_fine).ceil() as usize).min(n_fine);
        let mut list = Vec::new();
        for f in lo..hi {
            let o = (b.min((f + 1) as f64 * h_fine) - a.max(f as f64 * h_fine)).max(0.0) / h_fine;
            if o > 1e-12 {
                list.push((f, o));
            }
        }
        out.push(list);
    }
    out
}

/// Coarse-grain face transmissivities onto `coarse` (same physical extent).
///
/// For the x direction, every coarse face conducts along the path between the
/// two adjacent coarse cell centres: fine x-faces on that path are combined in
/// series, the fine rows inside the coarse row in parallel. Partially
/// overlapping fine values are scaled by the height fraction and inversely by
/// the width fraction. The y direction is the same with axes swapped.
pub fn coarsen_transmissivity(fine_t: &FaceField, coarse: &Grid2D) -> Result<FaceField> {
    let f = fine_t.grid;
    if !f.same_extent(coarse) {
        return Err(Error::InvalidArgument(
            "coarse grid must cover the fine grid's extent".into(),
        ));
    }
    if coarse.nx > f.nx || coarse.ny > f.ny {
        return Err(Error::InvalidArgument(
            "coarse grid must not be finer than the fine grid".into(),
        ));
    }
    let mut out = FaceField::zeros(*coarse);

    let x_paths = face_path_overlaps(f.nx, f.dx, coarse.nx, coarse.dx);
    let y_rows = cell_overlaps(f.ny, f.dy, coarse.ny, coarse.dy);
    for (cj, rows) in y_rows.iter().enumerate() {
        for (ci, path) in x_paths.iter().enumerate() {
            let cols: Vec<Vec<(f64, f64)>> = path
                .iter()
                .map(|&(fi, _)| rows.iter().map(|&(fj, h)| (fine_t.tx(fi, fj), h)).collect())
                .collect();
            let widths: Vec<f64> = path.iter().map(|&(_, w)| w).collect();
            out.x_faces[coarse.x_face(ci, cj)] = series_of_parallel(&cols, &widths);
        }
    }

    let y_paths = face_path_overlaps(f.ny, f.dy, coarse.ny, coarse.dy);
    let x_cols = cell_overlaps(f.nx, f.dx, coarse.nx, coarse.dx);
    for (cj, path) in y_paths.iter().enumerate() {
        for (ci, cols_in) in x_cols.iter().enumerate() {
            let rows: Vec<Vec<(f64, f64)>> = path
                .iter()
                .map(|&(fj, _)| {
                    cols_in
                        .iter()
                        .map(|&(fi, h)| (fine_t.ty(fi, fj), h))
                        .collect()
                })
                .collect();
            let widths: Vec<f64> = path.iter().map(|&(_, w)| w).collect();
            out.y_faces[coarse.y_face(ci, cj)] = series_of_parallel(&rows, &widths);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Linear,
    PiecewiseConstant,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "constant" | "piecewise-constant" => Ok(Self::PiecewiseConstant),
            other => Err(Error::InvalidArgument(format!(
                "unknown interpolation '{other}'"
            ))),
        }
    }
}

/// Up to two coarse contributions per fine index along one axis.
type AxisWeights = Vec<[(usize, f64); 2]>;

fn axis_weights(
    n_fine: usize,
    h_fine: f64,
    n_coarse: usize,
    h_coarse: f64,
    kind: Interpolation,
) -> AxisWeights {
    (0..n_fine)
        .map(|i| {
            let x = (i as f64 + 0.5) * h_fine;
            match kind {
                Interpolation::PiecewiseConstant => {
                    let c = ((x / h_coarse).floor() as usize).min(n_coarse - 1);
                    [(c, 1.0), (c, 0.0)]
                }
                Interpolation::Linear => {
                    // Coarse centres at (c + 1/2) h_coarse; zero slope beyond
                    // the outermost centres.
                    let s = x / h_coarse - 0.5;
                    if s <= 0.0 || n_coarse == 1 {
                        [(0, 1.0), (0, 0.0)]
                    } else if s >= (n_coarse - 1) as f64 {
                        [(n_coarse - 1, 1.0), (n_coarse - 1, 0.0)]
                    } else {
                        let c = s.floor() as usize;
                        let t = s - c as f64;
                        [(c, 1.0 - t), (c + 1, t)]
                    }
                }
            }
        })
        .collect()
}

/// Prolongation `E` (coarse to fine) as a tensor product of 1-D
/// interpolations; restriction is its exact transpose.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    pub fine: Grid2D,
    pub coarse: Grid2D,
    pub kind: Interpolation,
    wx: AxisWeights,
    wy: AxisWeights,
}

impl TransferOperator {
    pub fn new(fine: Grid2D, coarse: Grid2D, kind: Interpolation) -> Result<Self> {
        if !fine.same_extent(&coarse) {
            return Err(Error::InvalidArgument(
                "transfer grids must cover the same extent".into(),
            ));
        }
        Ok(Self {
            fine,
            coarse,
            kind,
            wx: axis_weights(fine.nx, fine.dx, coarse.nx, coarse.dx, kind),
            wy: axis_weights(fine.ny, fine.dy, coarse.ny, coarse.dy, kind),
        })
    }

    pub fn prolongate(&self, xc: &[f64]) -> Result<Vec<f64>> {
        check_len(self.coarse.len(), xc.len())?;
        let mut out = vec![0.0; self.fine.len()];
        self.prolongate_add(xc, &mut out);
        Ok(out)
    }

    pub fn restrict(&self, yf: &[f64]) -> Result<Vec<f64>> {
        check_len(self.fine.len(), yf.len())?;
        let mut out = vec![0.0; self.coarse.len()];
        self.restrict_into(yf, &mut out);
        Ok(out)
    }

    /// `out += E xc`.
    pub(crate) fn prolongate_add(&self, xc: &[f64], out: &mut [f64]) {
        let (fnx, cnx) = (self.fine.nx, self.coarse.nx);
        for (j, wy) in self.wy.iter().enumerate() {
            let row = &mut out[j * fnx..(j + 1) * fnx];
            for &(cj, b) in wy {
                if b == 0.0 {
                    continue;
                }
                let crow = &xc[cj * cnx..(cj + 1) * cnx];
                for (o, wx) in row.iter_mut().zip(&self.wx) {
                    *o += b * (wx[0].1 * crow[wx[0].0] + wx[1].1 * crow[wx[1].0]);
                }
            }
        }
    }

    /// `out = E^T yf`.
    pub(crate) fn restrict_into(&self, yf: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (fnx, cnx) = (self.fine.nx, self.coarse.nx);
        for (j, wy) in self.wy.iter().enumerate() {
            let row = &yf[j * fnx..(j + 1) * fnx];
            for &(cj, b) in wy {
                if b == 0.0 {
                    continue;
                }
                let crow = &mut out[cj * cnx..(cj + 1) * cnx];
                for (v, wx) in row.iter().zip(&self.wx) {
                    let bv = b * v;
                    crow[wx[0].0] += wx[0].1 * bv;
                    crow[wx[1].0] += wx[1].1 * bv;
                }
            }
        }
    }
}

/// How the smoothing degree `m` is picked per level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MPolicy {
    /// `m` = rounded effective linear scale factor of the next coarsening.
    #[default]
    ScaleFactor,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchyParams {
    pub scale: f64,
    pub m_policy: MPolicy,
    /// Grids with fewer cells than this are solved directly.
    pub coarsest_threshold: usize,
    pub splitting: SplittingKind,
    pub interpolation: Interpolation,
    pub semi_coarsen: bool,
    pub max_levels: usize,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        Self {
            scale: 4.0,
            m_policy: MPolicy::ScaleFactor,
            coarsest_threshold: 256,
            splitting: SplittingKind::SymmetricGaussSeidel,
            interpolation: Interpolation::Linear,
            semi_coarsen: false,
            max_levels: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Level {
    pub grid: Grid2D,
    pub transmissivity: FaceField,
    pub operator: StencilOperator,
    /// Smoothing degree used by the preconditioner on this level.
    pub m: usize,
    /// Transfer to the next coarser level; `None` on the coarsest.
    pub transfer: Option<TransferOperator>,
}

/// Levels from finest (0) to coarsest, plus a factorization of the coarsest
/// operator.
#[derive(Debug, Clone)]
pub struct LevelHierarchy {
    pub levels: Vec<Level>,
    pub splitting: SplittingKind,
    pub coarsest: DenseCholesky,
    pub params: HierarchyParams,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub nx: usize,
    pub ny: usize,
    pub dimension: usize,
    pub dx: f64,
    pub dy: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HierarchySummary {
    pub splitting: SplittingKind,
    pub scale: f64,
    pub levels: Vec<LevelSummary>,
}

impl LevelHierarchy {
    /// Build from fine transmissivities. Coarsening continues while the current
    /// grid has at least `coarsest_threshold` cells and some axis can shrink.
    pub fn build(fine_t: &FaceField, params: &HierarchyParams) -> Result<Self> {
        if let MPolicy::Fixed(0) = params.m_policy {
            return Err(Error::InvalidArgument(
                "smoothing degree must be at least 1".into(),
            ));
        }
        let mut levels = Vec::new();
        let mut t = fine_t.clone();
        loop {
            let grid = t.grid;
            let operator = assemble_operator(&t)?;
            Splitting::new(params.splitting, &operator)?;
            let stop = grid.len() < params.coarsest_threshold
                || levels.len() + 1 >= params.max_levels.max(1);
            let step = if stop {
                None
            } else {
                Some(choose_coarse_grid(
                    &grid,
                    params.scale,
                    params.semi_coarsen,
                    effective_aspect(&t),
                )?)
            };
            match step {
                Some(step) if step.grid.len() < grid.len() => {
                    let m = match params.m_policy {
                        MPolicy::Fixed(m) => m,
                        MPolicy::ScaleFactor => {
                            (step.factor_x.max(step.factor_y).round() as usize).max(1)
                        }
                    };
                    let transfer = TransferOperator::new(grid, step.grid, params.interpolation)?;
                    let coarse_t = coarsen_transmissivity(&t, &step.grid)?;
                    levels.push(Level {
                        grid,
                        transmissivity: t,
                        operator,
                        m,
                        transfer: Some(transfer),
                    });
                    t = coarse_t;
                }
                _ => {
                    let m = match params.m_policy {
                        MPolicy::Fixed(m) => m,
                        MPolicy::ScaleFactor => (params.scale.round() as usize).max(1),
                    };
                    let coarsest = DenseCholesky::from_operator(&operator)?;
                    levels.push(Level {
                        grid,
                        transmissivity: t,
                        operator,
                        m,
                        transfer: None,
                    });
                    return Ok(Self {
                        levels,
                        splitting: params.splitting,
                        coarsest,
                        params: *params,
                    });
                }
            }
        }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &Level {
        &self.levels[0]
    }

    pub fn splitting_at(&self, k: usize) -> Splitting<'_> {
        Splitting {
            kind: self.splitting,
            op: &self.levels[k].operator,
        }
    }

    pub fn summary(&self) -> HierarchySummary {
        HierarchySummary {
            splitting: self.splitting,
            scale: self.params.scale,
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(k, l)| LevelSummary {
                    level: k,
                    nx: l.grid.nx,
                    ny: l.grid.ny,
                    dimension: l.grid.len(),
                    dx: l.grid.dx,
                    dy: l.grid.dy,
                    m: l.m,
                })
                .collect(),
        }
    }
}
