//! Cell-centred 5-point discretization of `div(K grad P) = S` with a diagonal,
//! face-centred permeability.
//!
//! Equations are written as net face fluxes: for every cell
//! `sum_f T_f (P_c - P_nb) = -S_c dx dy + boundary terms`, so the assembled
//! operator is symmetric positive (semi)definite.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{CellField, FaceField, Grid2D};

/// Harmonic mean of two adjacent cell permeabilities. Zero if either is zero.
pub fn harmonic_face_mean(ka: f64, kb: f64) -> Result<f64> {
    if ka < 0.0 || kb < 0.0 || ka.is_nan() || kb.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "permeabilities must be non-negative, got {ka}, {kb}"
        )));
    }
    if ka == 0.0 || kb == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * ka * kb / (ka + kb))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Condition on one boundary face. For Dirichlet faces `value` is the
/// pressure; for Neumann faces it is the outward flux density `K grad P . n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub kind: BoundaryKind,
    pub value: f64,
}

impl BoundaryCondition {
    pub const NO_FLOW: BoundaryCondition = BoundaryCondition {
        kind: BoundaryKind::Neumann,
        value: 0.0,
    };

    pub fn dirichlet(value: f64) -> Self {
        Self {
            kind: BoundaryKind::Dirichlet,
            value,
        }
    }

    pub fn neumann(flux: f64) -> Self {
        Self {
            kind: BoundaryKind::Neumann,
            value: flux,
        }
    }

    #[inline]
    pub fn is_dirichlet(&self) -> bool {
        self.kind == BoundaryKind::Dirichlet
    }
}

/// One condition per boundary face. `left`/`right` are indexed by row,
/// `bottom`/`top` by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub left: Vec<BoundaryCondition>,
    pub right: Vec<BoundaryCondition>,
    pub bottom: Vec<BoundaryCondition>,
    pub top: Vec<BoundaryCondition>,
}

impl BoundarySpec {
    pub fn uniform(grid: &Grid2D, bc: BoundaryCondition) -> Self {
        Self {
            left: vec![bc; grid.ny],
            right: vec![bc; grid.ny],
            bottom: vec![bc; grid.nx],
            top: vec![bc; grid.nx],
        }
    }

    /// Fixed pressure on the left and right sides, no flow through top and bottom.
    pub fn channel(grid: &Grid2D, p_left: f64, p_right: f64) -> Self {
        Self {
            left: vec![BoundaryCondition::dirichlet(p_left); grid.ny],
            right: vec![BoundaryCondition::dirichlet(p_right); grid.ny],
            bottom: vec![BoundaryCondition::NO_FLOW; grid.nx],
            top: vec![BoundaryCondition::NO_FLOW; grid.nx],
        }
    }

    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        check_len(grid.ny, self.left.len())?;
        check_len(grid.ny, self.right.len())?;
        check_len(grid.nx, self.bottom.len())?;
        check_len(grid.nx, self.top.len())?;
        if self.faces().any(|c| !c.value.is_finite()) {
            return Err(Error::InvalidArgument(
                "boundary values must be finite".into(),
            ));
        }
        Ok(())
    }

    fn faces(&self) -> impl Iterator<Item = &BoundaryCondition> {
        self.left
            .iter()
            .chain(&self.right)
            .chain(&self.bottom)
            .chain(&self.top)
    }

    pub fn has_dirichlet(&self) -> bool {
        self.faces().any(BoundaryCondition::is_dirichlet)
    }
}

/// Diagonal permeability tensor `K = diag(kxx, kyy)`, cell centred.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPermeability {
    pub kxx: CellField,
    pub kyy: CellField,
}

impl DiagonalPermeability {
    pub fn isotropic(k: &CellField) -> Self {
        Self {
            kxx: k.clone(),
            kyy: k.clone(),
        }
    }

    /// `kyy = ratio * kxx`.
    pub fn with_ratio(k: &CellField, ratio: f64) -> Self {
        Self {
            kxx: k.clone(),
            kyy: k.map(|v| v * ratio),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kxx.grid != self.kyy.grid {
            return Err(Error::InvalidArgument(
                "kxx and kyy live on different grids".into(),
            ));
        }
        if self
            .kxx
            .values
            .iter()
            .chain(&self.kyy.values)
            .any(|&k| !(k >= 0.0) || !k.is_finite())
        {
            return Err(Error::InvalidArgument(
                "permeability must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Face transmissivities `T_xx = (dy/dx) K_xx`, `T_yy = (dx/dy) K_yy` for an
/// isotropic cell permeability.
pub fn build_transmissivities(cell_k: &CellField, bc: &BoundarySpec) -> Result<FaceField> {
    build_transmissivities_diag(&DiagonalPermeability::isotropic(cell_k), bc)
}

/// Interior faces take the harmonic mean of the adjacent cells. Neumann
/// boundary faces are closed (T = 0); Dirichlet faces see half a cell, so
/// their transmissivity is doubled.
pub fn build_transmissivities_diag(
    k: &DiagonalPermeability,
    bc: &BoundarySpec,
) -> Result<FaceField> {
    k.validate()?;
    let g = k.kxx.grid;
    bc.validate(&g)?;
    let ax = g.dy / g.dx;
    let ay = g.dx / g.dy;
    let mut t = FaceField::zeros(g);
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let v = if i == 0 {
                if bc.left[j].is_dirichlet() {
                    2.0 * ax * k.kxx.get(0, j)
                } else {
                    0.0
                }
            } else if i == g.nx {
                if bc.right[j].is_dirichlet() {
                    2.0 * ax * k.kxx.get(g.nx - 1, j)
                } else {
                    0.0
                }
            } else {
                ax * harmonic_face_mean(k.kxx.get(i - 1, j), k.kxx.get(i, j))?
            };
            t.x_faces[g.x_face(i, j)] = v;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let v = if j == 0 {
                if bc.bottom[i].is_dirichlet() {
                    2.0 * ay * k.kyy.get(i, 0)
                } else {
                    0.0
                }
            } else if j == g.ny {
                if bc.top[i].is_dirichlet() {
                    2.0 * ay * k.kyy.get(i, g.ny - 1)
                } else {
                    0.0
                }
            } else {
                ay * harmonic_face_mean(k.kyy.get(i, j - 1), k.kyy.get(i, j))?
            };
            t.y_faces[g.y_face(i, j)] = v;
        }
    }
    Ok(t)
}

/// Symmetric 5-point operator stored as three arrays. `east[k]` couples cell
/// `k` to `k + 1` and is zero on the last column; `north[k]` couples `k` to
/// `k + nx` and is zero on the last row.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilOperator {
    pub grid: Grid2D,
    pub diag: Vec<f64>,
    pub east: Vec<f64>,
    pub north: Vec<f64>,
}

/// Assemble the operator from face transmissivities. The diagonal is the sum
/// of the four face transmissivities of the cell, including boundary faces.
pub fn assemble_operator(t: &FaceField) -> Result<StencilOperator> {
    let g = t.grid;
    let n = g.len();
    let mut diag = vec![0.0; n];
    let mut east = vec![0.0; n];
    let mut north = vec![0.0; n];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let (w, e) = (t.tx(i, j), t.tx(i + 1, j));
            let (s, nn) = (t.ty(i, j), t.ty(i, j + 1));
            if w < 0.0 || e < 0.0 || s < 0.0 || nn < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "negative transmissivity around cell ({i}, {j})"
                )));
            }
            diag[k] = w + e + s + nn;
            if diag[k] == 0.0 {
                return Err(Error::IsolatedCell { i, j });
            }
            if i + 1 < g.nx {
                east[k] = -e;
            }
            if j + 1 < g.ny {
                north[k] = -nn;
            }
        }
    }
    Ok(StencilOperator {
        grid: g,
        diag,
        east,
        north,
    })
}

impl StencilOperator {
    #[inline]
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), x.len())?;
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let nx = self.grid.nx;
        let ny = self.grid.ny;
        let (d, e, n) = (&self.diag, &self.east, &self.north);
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx {
                let k = row + i;
                let mut v = d[k] * x[k];
                if i + 1 < nx {
                    v += e[k] * x[k + 1];
                }
                if i > 0 {
                    v += e[k - 1] * x[k - 1];
                }
                if j + 1 < ny {
                    v += n[k] * x[k + nx];
                }
                if j > 0 {
                    v += n[k - nx] * x[k - nx];
                }
                y[k] = v;
            }
        }
    }

    /// `out = b - A x`.
    pub(crate) fn residual_into(&self, x: &[f64], b: &[f64], out: &mut [f64]) {
        self.apply_into(x, out);
        for (o, bi) in out.iter_mut().zip(b) {
            *o = bi - *o;
        }
    }

    /// True when some row is strictly diagonally dominant, i.e. the operator
    /// touches a Dirichlet face and is positive definite (for a connected grid).
    pub fn is_anchored(&self) -> bool {
        let nx = self.grid.nx;
        (0..self.len()).any(|k| {
            let i = k % nx;
            let mut off = -self.east[k] - self.north[k];
            if i > 0 {
                off -= self.east[k - 1];
            }
            if k >= nx {
                off -= self.north[k - nx];
            }
            self.diag[k] > off * (1.0 + 1e-12)
        })
    }

    /// Dense row-major copy. Only sensible for small grids.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let nx = self.grid.nx;
        let mut a = vec![0.0; n * n];
        for k in 0..n {
            a[k * n + k] = self.diag[k];
            if (k % nx) + 1 < nx {
                a[k * n + k + 1] = self.east[k];
                a[(k + 1) * n + k] = self.east[k];
            }
            if k + nx < n {
                a[k * n + k + nx] = self.north[k];
                a[(k + nx) * n + k] = self.north[k];
            }
        }
        a
    }
}

/// `r = b - A x`.
pub fn residual(a: &StencilOperator, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_len(a.len(), x.len())?;
    check_len(a.len(), b.len())?;
    let mut r = vec![0.0; b.len()];
    a.residual_into(x, b, &mut r);
    Ok(r)
}

/// Zero-boundary form of a problem: solve `operator * dp = source`, then the
/// pressure is `dp + lift`.
#[derive(Debug, Clone)]
pub struct LiftedProblem {
    pub transmissivity: FaceField,
    pub operator: StencilOperator,
    pub source: Vec<f64>,
    pub lift: Vec<f64>,
    /// No Dirichlet face: the operator has the constants as null space.
    pub singular: bool,
}

impl LiftedProblem {
    pub fn grid(&self) -> Grid2D {
        self.operator.grid
    }

    pub fn reconstruct(&self, delta: &[f64]) -> Result<CellField> {
        check_len(self.lift.len(), delta.len())?;
        let values = delta.iter().zip(&self.lift).map(|(d, l)| d + l).collect();
        CellField::new(self.grid(), values)
    }
}

/// Build the zero-boundary problem for an isotropic permeability. `source` is
/// `S` in `div(K grad P) = S`; `None` means no source. Pure Neumann problems
/// are rejected.
pub fn boundary_lift(
    cell_k: &CellField,
    bc: &BoundarySpec,
    source: Option<&CellField>,
) -> Result<LiftedProblem> {
    boundary_lift_diag(&DiagonalPermeability::isotropic(cell_k), bc, source, false)
}

/// General form. With `allow_pure_neumann` a boundary without Dirichlet faces
/// is accepted provided sources and fluxes balance; the returned problem is
/// flagged `singular`.
pub fn boundary_lift_diag(
    k: &DiagonalPermeability,
    bc: &BoundarySpec,
    source: Option<&CellField>,
    allow_pure_neumann: bool,
) -> Result<LiftedProblem> {
    let g = k.kxx.grid;
    let t = build_transmissivities_diag(k, bc)?;
    let operator = assemble_operator(&t)?;
    if let Some(s) = source {
        if s.grid != g {
            return Err(Error::InvalidArgument(
                "source grid differs from permeability grid".into(),
            ));
        }
    }

    let b_full = full_rhs(&g, &t, bc, source);
    let singular = !bc.has_dirichlet();
    if singular {
        if !allow_pure_neumann {
            return Err(Error::PureNeumann(
                "at least one Dirichlet face is required".into(),
            ));
        }
        let total: f64 = b_full.iter().sum();
        let scale: f64 = b_full.iter().map(|v| v.abs()).sum();
        if total.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) && total.abs() > 1e-300 {
            return Err(Error::PureNeumann(format!(
                "sources and boundary fluxes do not balance (net {total:e})"
            )));
        }
    }

    let lift = smooth_lift(&g, bc);
    let mut src = vec![0.0; g.len()];
    operator.residual_into(&lift, &b_full, &mut src);
    Ok(LiftedProblem {
        transmissivity: t,
        operator,
        source: src,
        lift,
        singular,
    })
}

/// Right-hand side of the unlifted system: `-S dx dy` plus the Dirichlet and
/// Neumann boundary contributions.
fn full_rhs(g: &Grid2D, t: &FaceField, bc: &BoundarySpec, source: Option<&CellField>) -> Vec<f64> {
    let area = g.dx * g.dy;
    let mut b: Vec<f64> = match source {
        Some(s) => s.values.iter().map(|v| -v * area).collect(),
        None => vec![0.0; g.len()],
    };
    let mut add = |k: usize, c: &BoundaryCondition, tf: f64, len: f64| match c.kind {
        BoundaryKind::Dirichlet => b[k] += tf * c.value,
        BoundaryKind::Neumann => b[k] += c.value * len,
    };
    for j in 0..g.ny {
        add(g.idx(0, j), &bc.left[j], t.tx(0, j), g.dy);
        add(g.idx(g.nx - 1, j), &bc.right[j], t.tx(g.nx, j), g.dy);
    }
    for i in 0..g.nx {
        add(g.idx(i, 0), &bc.bottom[i], t.ty(i, 0), g.dx);
        add(g.idx(i, g.ny - 1), &bc.top[i], t.ty(i, g.ny), g.dx);
    }
    b
}

/// Fill the Neumann gaps of one side's Dirichlet profile by linear
/// interpolation along the side; `None` if the side has no Dirichlet face.
fn side_profile(side: &[BoundaryCondition]) -> Option<Vec<f64>> {
    let known: Vec<usize> = (0..side.len())
        .filter(|&k| side[k].is_dirichlet())
        .collect();
    let (&first, &last) = (known.first()?, known.last()?);
    let out = (0..side.len())
        .map(|k| {
            if k <= first {
                side[first].value
            } else if k >= last {
                side[last].value
            } else {
                let hi = known.partition_point(|&q| q < k);
                let (a, b) = (known[hi - 1], known[hi]);
                let w = (k - a) as f64 / (b - a) as f64;
                (1.0 - w) * side[a].value + w * side[b].value
            }
        })
        .collect();
    Some(out)
}

/// Inverse-distance blend of the four side profiles. For data on two opposite
/// sides only this is exactly the linear interpolation between them.
fn smooth_lift(g: &Grid2D, bc: &BoundarySpec) -> Vec<f64> {
    let left = side_profile(&bc.left);
    let right = side_profile(&bc.right);
    let bottom = side_profile(&bc.bottom);
    let top = side_profile(&bc.top);
    if left.is_none() && right.is_none() && bottom.is_none() && top.is_none() {
        return vec![0.0; g.len()];
    }
    let (w, h) = (g.width(), g.height());
    let mut lift = vec![0.0; g.len()];
    for j in 0..g.ny {
        let y = (j as f64 + 0.5) * g.dy;
        for i in 0..g.nx {
            let x = (i as f64 + 0.5) * g.dx;
            let mut num = 0.0;
            let mut den = 0.0;
            let mut acc = |p: &Option<Vec<f64>>, at: usize, d: f64| {
                if let Some(p) = p {
                    num += p[at] / d;
                    den += 1.0 / d;
                }
            };
            acc(&left, j, x);
            acc(&right, j, w - x);
            acc(&bottom, i, y);
            acc(&top, i, h - y);
            lift[g.idx(i, j)] = num / den;
        }
    }
    lift
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_k(g: Grid2D, seed: u64) -> CellField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..g.len())
            .map(|_| (rng.random_range(-2.0..2.0f64)).exp())
            .collect();
        CellField::new(g, v).unwrap()
    }

    fn dense(op: &StencilOperator) -> DMatrix<f64> {
        let n = op.len();
        DMatrix::from_row_slice(n, n, &op.to_dense())
    }

    #[test]
    fn harmonic_mean_cases() {
        assert_eq!(harmonic_face_mean(2.0, 2.0).unwrap(), 2.0);
        assert!((harmonic_face_mean(1.0, 3.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(harmonic_face_mean(0.0, 5.0).unwrap(), 0.0);
        assert!(harmonic_face_mean(-1.0, 5.0).is_err());
    }

    #[test]
    fn transmissivity_cases() {
        let g = Grid2D::unit(4, 4).unwrap();
        let k = CellField::constant(g, 1.0);
        let mut bc = BoundarySpec::channel(&g, 1.0, 0.0);
        bc.top[2] = BoundaryCondition::dirichlet(0.5);
        let t = build_transmissivities(&k, &bc).unwrap();
        assert_eq!(t.tx(2, 1), 1.0);
        assert_eq!(t.ty(1, 2), 1.0);
        assert_eq!(t.ty(1, 0), 0.0);
        assert_eq!(t.ty(0, 4), 0.0);
        assert_eq!(t.tx(0, 3), 2.0);
        assert_eq!(t.tx(4, 0), 2.0);
        assert_eq!(t.ty(2, 4), 2.0);
    }

    #[test]
    fn transmissivity_aspect_scaling() {
        let g = Grid2D::new(3, 3, 2.0, 0.5).unwrap();
        let k = CellField::constant(g, 3.0);
        let t = build_transmissivities(&k, &BoundarySpec::uniform(&g, BoundaryCondition::NO_FLOW))
            .unwrap();
        assert!((t.tx(1, 1) - 0.25 * 3.0).abs() < 1e-15);
        assert!((t.ty(1, 1) - 4.0 * 3.0).abs() < 1e-15);
    }

    #[test]
    fn pure_neumann_has_constant_null_space() {
        let g = Grid2D::unit(5, 4).unwrap();
        let k = random_k(g, 1);
        let t = build_transmissivities(&k, &BoundarySpec::uniform(&g, BoundaryCondition::NO_FLOW))
            .unwrap();
        let a = assemble_operator(&t).unwrap();
        assert!(!a.is_anchored());
        let y = a.apply(&vec![3.7; g.len()]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-12));
        assert!(a
            .apply(&vec![0.0; g.len()])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn two_cell_conductance() {
        let g = Grid2D::unit(2, 1).unwrap();
        let mut t = FaceField::zeros(g);
        t.x_faces[g.x_face(1, 0)] = 1.0;
        let a = assemble_operator(&t).unwrap();
        assert_eq!(a.to_dense(), vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn isolated_cell_is_reported() {
        let g = Grid2D::unit(3, 1).unwrap();
        let mut t = FaceField::zeros(g);
        t.x_faces[g.x_face(1, 0)] = 1.0;
        assert!(matches!(
            assemble_operator(&t),
            Err(Error::IsolatedCell { i: 2, j: 0 })
        ));
    }

    /// Dense assembly straight from cell permeabilities.
    fn dense_fd_oracle(k: &CellField, bc: &BoundarySpec) -> DMatrix<f64> {
        let g = k.grid;
        let n = g.len();
        let mut a = DMatrix::zeros(n, n);
        let hm = |a: f64, b: f64| 2.0 * a * b / (a + b);
        let (ax, ay) = (g.dy / g.dx, g.dx / g.dy);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = g.idx(i, j);
                let kc = k.get(i, j);
                let mut link = |nb: Option<usize>, t: f64| {
                    a[(c, c)] += t;
                    if let Some(q) = nb {
                        a[(c, q)] -= t;
                    }
                };
                if i > 0 {
                    link(Some(g.idx(i - 1, j)), ax * hm(kc, k.get(i - 1, j)));
                } else if bc.left[j].is_dirichlet() {
                    link(None, 2.0 * ax * kc);
                }
                if i + 1 < g.nx {
                    link(Some(g.idx(i + 1, j)), ax * hm(kc, k.get(i + 1, j)));
                } else if bc.right[j].is_dirichlet() {
                    link(None, 2.0 * ax * kc);
                }
                if j > 0 {
                    link(Some(g.idx(i, j - 1)), ay * hm(kc, k.get(i, j - 1)));
                } else if bc.bottom[i].is_dirichlet() {
                    link(None, 2.0 * ay * kc);
                }
                if j + 1 < g.ny {
                    link(Some(g.idx(i, j + 1)), ay * hm(kc, k.get(i, j + 1)));
                } else if bc.top[i].is_dirichlet() {
                    link(None, 2.0 * ay * kc);
                }
            }
        }
        a
    }

    #[test]
    fn assembly_matches_dense_oracle() {
        let g = Grid2D::new(5, 5, 0.3, 0.7).unwrap();
        let k = random_k(g, 7);
        let mut bc = BoundarySpec::channel(&g, 1.0, 0.0);
        bc.bottom[1] = BoundaryCondition::dirichlet(0.2);
        let a = assemble_operator(&build_transmissivities(&k, &bc).unwrap()).unwrap();
        let oracle = dense_fd_oracle(&k, &bc);
        let got = dense(&a);
        let scale = oracle.amax();
        assert!((got - oracle).amax() <= 1e-14 * scale);
    }

    #[test]
    fn apply_matches_dense_matvec() {
        let g = Grid2D::unit(8, 8).unwrap();
        let k = random_k(g, 11);
        let a = assemble_operator(
            &build_transmissivities(&k, &BoundarySpec::channel(&g, 1.0, 0.0)).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let oracle = dense_fd_oracle(&k, &BoundarySpec::channel(&g, 1.0, 0.0))
            * DVector::from_vec(x.clone());
        let y = a.apply(&x).unwrap();
        let err = (DVector::from_vec(y) - &oracle).amax();
        assert!(err <= 1e-13 * oracle.amax());
        assert!(a.apply(&x[1..]).is_err());
    }

    #[test]
    fn operator_symmetric_and_positive() {
        let g = Grid2D::unit(7, 6).unwrap();
        let k = random_k(g, 13);
        let a = assemble_operator(
            &build_transmissivities(&k, &BoundarySpec::channel(&g, 1.0, 0.0)).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let x: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let xay = crate::grid::dot(&y, &a.apply(&x).unwrap()).unwrap();
            let yax = crate::grid::dot(&x, &a.apply(&y).unwrap()).unwrap();
            assert!((xay - yax).abs() <= 1e-13 * xay.abs().max(1.0));
            let xax = crate::grid::dot(&x, &a.apply(&x).unwrap()).unwrap();
            assert!(xax > 0.0);
        }
        assert!(a.is_anchored());
        // Off-diagonals are non-positive and rows weakly dominant.
        assert!(a.east.iter().chain(&a.north).all(|&v| v <= 0.0));
    }

    #[test]
    fn zero_boundary_data_gives_zero_lift() {
        let g = Grid2D::unit(6, 5).unwrap();
        let k = random_k(g, 2);
        let s = CellField::new(g, (0..g.len()).map(|q| q as f64 * 0.1).collect()).unwrap();
        let p = boundary_lift(&k, &BoundarySpec::channel(&g, 0.0, 0.0), Some(&s)).unwrap();
        assert!(p.lift.iter().all(|&v| v == 0.0));
        for (b, sv) in p.source.iter().zip(&s.values) {
            assert_eq!(*b, -sv);
        }
    }

    #[test]
    fn lift_is_linear_for_channel() {
        let g = Grid2D::unit(10, 4).unwrap();
        let p = boundary_lift(
            &CellField::constant(g, 1.0),
            &BoundarySpec::channel(&g, 1.0, 0.0),
            None,
        )
        .unwrap();
        for i in 0..10 {
            let x = (i as f64 + 0.5) / 10.0;
            assert!((p.lift[g.idx(i, 2)] - (1.0 - x)).abs() < 1e-14);
        }
        // For uniform K the linear lift is already the discrete solution.
        assert!(p.source.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn lifted_solution_matches_unlifted_dense_solve() {
        let g = Grid2D::unit(8, 8).unwrap();
        let k = random_k(g, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut random_side = |n: usize| -> Vec<BoundaryCondition> {
            (0..n)
                .map(|_| {
                    if rng.random_bool(0.7) {
                        BoundaryCondition::dirichlet(rng.random_range(-1.0..1.0))
                    } else {
                        BoundaryCondition::neumann(rng.random_range(-0.5..0.5))
                    }
                })
                .collect()
        };
        let bc = BoundarySpec {
            left: random_side(8),
            right: random_side(8),
            bottom: random_side(8),
            top: random_side(8),
        };
        let s = CellField::new(
            g,
            (0..g.len()).map(|q| ((q * 7) % 5) as f64 - 2.0).collect(),
        )
        .unwrap();
        let lifted = boundary_lift(&k, &bc, Some(&s)).unwrap();

        // Unlifted system assembled independently.
        let a = dense_fd_oracle(&k, &bc);
        let mut b = DVector::from_iterator(g.len(), s.values.iter().map(|v| -v));
        let hk = |i, j| k.get(i, j);
        for j in 0..8 {
            let c = g.idx(0, j);
            b[c] += if bc.left[j].is_dirichlet() {
                2.0 * hk(0, j) * bc.left[j].value
            } else {
                bc.left[j].value
            };
            let c = g.idx(7, j);
            b[c] += if bc.right[j].is_dirichlet() {
                2.0 * hk(7, j) * bc.right[j].value
            } else {
                bc.right[j].value
            };
        }
        for i in 0..8 {
            let c = g.idx(i, 0);
            b[c] += if bc.bottom[i].is_dirichlet() {
                2.0 * hk(i, 0) * bc.bottom[i].value
            } else {
                bc.bottom[i].value
            };
            let c = g.idx(i, 7);
            b[c] += if bc.top[i].is_dirichlet() {
                2.0 * hk(i, 7) * bc.top[i].value
            } else {
                bc.top[i].value
            };
        }
        let p_oracle = a.clone().lu().solve(&b).unwrap();

        let al = dense(&lifted.operator);
        let dp = al
            .lu()
            .solve(&DVector::from_vec(lifted.source.clone()))
            .unwrap();
        let p = lifted.reconstruct(dp.as_slice()).unwrap();
        let err = (DVector::from_vec(p.values) - &p_oracle).amax();
        assert!(err <= 1e-9, "err {err}");
    }

    #[test]
    fn pure_neumann_rules() {
        let g = Grid2D::unit(4, 4).unwrap();
        let k = CellField::constant(g, 1.0);
        let closed = BoundarySpec::uniform(&g, BoundaryCondition::NO_FLOW);
        assert!(matches!(
            boundary_lift(&k, &closed, None),
            Err(Error::PureNeumann(_))
        ));
        let perm = DiagonalPermeability::isotropic(&k);
        let ok = boundary_lift_diag(&perm, &closed, None, true).unwrap();
        assert!(ok.singular);
        let mut leaky = closed.clone();
        leaky.left[0] = BoundaryCondition::neumann(1.0);
        assert!(matches!(
            boundary_lift_diag(&perm, &leaky, None, true),
            Err(Error::PureNeumann(_))
        ));
        leaky.right[3] = BoundaryCondition::neumann(-1.0);
        assert!(boundary_lift_diag(&perm, &leaky, None, true).is_ok());
    }

    #[test]
    fn residual_cases() {
        let g = Grid2D::unit(4, 3).unwrap();
        let a = assemble_operator(
            &build_transmissivities(&random_k(g, 3), &BoundarySpec::channel(&g, 1.0, 0.0)).unwrap(),
        )
        .unwrap();
        let x: Vec<f64> = (0..g.len()).map(|q| q as f64).collect();
        let b = a.apply(&x).unwrap();
        assert!(residual(&a, &x, &b)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-12));
        assert_eq!(residual(&a, &vec![0.0; g.len()], &b).unwrap(), b);
        assert!(residual(&a, &x[..3], &b).is_err());
        // Dense exact solution has a negligible residual.
        let sol = dense(&a).lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let r = residual(&a, sol.as_slice(), &b).unwrap();
        assert!(crate::grid::max_abs(&r) <= 1e-9 * crate::grid::max_abs(&b));
    }

    /// Plain CG used only to solve the manufactured problems below.
    fn cg(a: &StencilOperator, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let stop = rr * 1e-28;
        for _ in 0..20 * n {
            if rr <= stop {
                break;
            }
            let q = a.apply(&p).unwrap();
            let alpha = rr / p.iter().zip(&q).map(|(u, v)| u * v).sum::<f64>();
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            for k in 0..n {
                p[k] = r[k] + rr_new / rr * p[k];
            }
            rr = rr_new;
        }
        x
    }

    fn manufactured_error(n: usize) -> f64 {
        use std::f64::consts::PI;
        let h = 1.0 / n as f64;
        let g = Grid2D::new(n, n, h, h).unwrap();
        let exact = |i: usize, j: usize| {
            ((i as f64 + 0.5) * h * PI).sin() * ((j as f64 + 0.5) * h * PI).sin()
        };
        let s = CellField::new(
            g,
            (0..g.len())
                .map(|q| -2.0 * PI * PI * exact(q % n, q / n))
                .collect(),
        )
        .unwrap();
        let p = boundary_lift(
            &CellField::constant(g, 1.0),
            &BoundarySpec::uniform(&g, BoundaryCondition::dirichlet(0.0)),
            Some(&s),
        )
        .unwrap();
        let dp = cg(&p.operator, &p.source);
        let sol = p.reconstruct(&dp).unwrap();
        (0..g.len())
            .map(|q| (sol.values[q] - exact(q % n, q / n)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_order_convergence() {
        let e1 = manufactured_error(16);
        let e2 = manufactured_error(32);
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dirichlet_half_cell_is_second_order_in_1d() {
        // P = x(1 - x) with P(0) = P(1) = 0, no flow top and bottom.
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let g = Grid2D::new(n, 4, h, h).unwrap();
            let s = CellField::constant(g, -2.0);
            let bc = BoundarySpec::channel(&g, 0.0, 0.0);
            let p = boundary_lift(&CellField::constant(g, 1.0), &bc, Some(&s)).unwrap();
            let a = dense(&p.operator);
            let dp = a.lu().solve(&DVector::from_vec(p.source.clone())).unwrap();
            (0..g.len())
                .map(|q| {
                    let x = ((q % n) as f64 + 0.5) * h;
                    (dp[q] + p.lift[q] - x * (1.0 - x)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e4, e8, e16) = (err(4), err(8), err(16));
        assert!(e4 < 0.02, "{e4}");
        assert!((3.5..=4.5).contains(&(e4 / e8)), "{}", e4 / e8);
        assert!((3.5..=4.5).contains(&(e8 / e16)), "{}", e8 / e16);
    }
}
