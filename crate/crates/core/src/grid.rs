//! Grid geometry, cell and face containers, and the vector primitives shared
//! by every solver.
//!
//! Cells are indexed row-major: cell `(i, j)` lives at `j * nx + i`, with `i`
//! running along x and `j` along y. Face fields include the boundary faces,
//! so the x-face array has `nx + 1` columns and the y-face array `ny + 1` rows.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Regular rectangular grid of `nx * ny` cells of size `dx * dy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid must have at least one cell, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cell sizes must be positive, got dx={dx}, dy={dy}"
            )));
        }
        Ok(Self { nx, ny, dx, dy })
    }

    /// Square cells of unit size.
    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 1.0, 1.0)
    }

    /// Number of unknowns.
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    #[inline]
    pub fn x_face_len(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    #[inline]
    pub fn y_face_len(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    /// Index of the x-face on the left of column `i` (i = nx is the right boundary).
    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Index of the y-face below row `j` (j = ny is the top boundary).
    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// True when both grids cover the same physical rectangle.
    pub fn same_extent(&self, other: &Grid2D) -> bool {
        let tol = 1e-9;
        ((self.width() - other.width()) / self.width()).abs() < tol
            && ((self.height() - other.height()) / self.height()).abs() < tol
    }
}

/// One value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite cell value at index {k}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Face-centred values: `x_faces` holds `(nx + 1) * ny` entries, `y_faces`
/// holds `nx * (ny + 1)` entries; boundary faces included.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub grid: Grid2D,
    pub x_faces: Vec<f64>,
    pub y_faces: Vec<f64>,
}

impl FaceField {
    pub fn new(grid: Grid2D, x_faces: Vec<f64>, y_faces: Vec<f64>) -> Result<Self> {
        check_len(grid.x_face_len(), x_faces.len())?;
        check_len(grid.y_face_len(), y_faces.len())?;
        if x_faces
            .iter()
            .chain(&y_faces)
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::InvalidArgument(
                "face values must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            grid,
            x_faces,
            y_faces,
        })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            x_faces: vec![0.0; grid.x_face_len()],
            y_faces: vec![0.0; grid.y_face_len()],
        }
    }

    #[inline]
    pub fn tx(&self, i: usize, j: usize) -> f64 {
        self.x_faces[self.grid.x_face(i, j)]
    }

    #[inline]
    pub fn ty(&self, i: usize, j: usize) -> f64 {
        self.y_faces[self.grid.y_face(i, j)]
    }
}

/// Inner product of two cell vectors.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums let the compiler vectorise without reassociation flags.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Root-mean-square of a residual vector, `sqrt(|r|^2 / N)`.
pub fn rms_residual(r: &[f64]) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::InvalidArgument("rms of an empty vector".into()));
    }
    Ok((dot_unchecked(r, r) / r.len() as f64).sqrt())
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn grid_rejects_degenerate_sizes() {
        assert!(Grid2D::new(0, 3, 1.0, 1.0).is_err());
        assert!(Grid2D::new(3, 3, 0.0, 1.0).is_err());
        assert!(Grid2D::new(3, 3, 1.0, -2.0).is_err());
        let g = Grid2D::new(3, 2, 0.5, 2.0).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.idx(2, 1), 5);
        assert_eq!(g.x_face_len(), 8);
        assert_eq!(g.y_face_len(), 9);
    }

    #[test]
    fn dot_small_cases() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(dot(&[0.0; 5], &[1.0, -2.0, 3.0, 4.0, 5.0]).unwrap(), 0.0);
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dot_matches_plain_summation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut oracle = 0.0;
        for k in 0..16 {
            oracle += a[k] * b[k];
        }
        let got = dot(&a, &b).unwrap();
        assert!((got - oracle).abs() <= 1e-14 * oracle.abs().max(1e-300));
    }

    #[test]
    fn rms_cases() {
        assert!((rms_residual(&[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rms_residual(&[0.0; 7]).unwrap(), 0.0);
        assert!((rms_residual(&[-2.5; 9]).unwrap() - 2.5).abs() < 1e-15);
        assert!(rms_residual(&[]).is_err());
    }

    proptest! {
        #[test]
        fn dot_symmetric_bilinear(
            a in prop::collection::vec(-1e3f64..1e3, 1..64),
            seed in 0u64..1000,
            alpha in -10.0f64..10.0,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = a.iter().map(|_| rng.random_range(-1e3..1e3)).collect();
            let c: Vec<f64> = a.iter().map(|_| rng.random_range(-1e3..1e3)).collect();
            let ab = dot(&a, &b).unwrap();
            prop_assert!((ab - dot(&b, &a).unwrap()).abs() <= 1e-13 * (1.0 + ab.abs()));
            let lhs: Vec<f64> = a.iter().zip(&c).map(|(x, y)| alpha * x + y).collect();
            let l = dot(&lhs, &b).unwrap();
            let r = alpha * ab + dot(&c, &b).unwrap();
            let scale: f64 = a.iter().zip(&b).map(|(x, y)| (alpha * x * y).abs()).sum::<f64>()
                + c.iter().zip(&b).map(|(x, y)| (x * y).abs()).sum::<f64>();
            prop_assert!((l - r).abs() <= 1e-13 * scale.max(1.0));
        }

        #[test]
        fn rms_is_absolutely_homogeneous(
            r in prop::collection::vec(-1e3f64..1e3, 1..64),
            alpha in -100.0f64..100.0,
        ) {
            let scaled: Vec<f64> = r.iter().map(|x| alpha * x).collect();
            let lhs = rms_residual(&scaled).unwrap();
            let rhs = alpha.abs() * rms_residual(&r).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }
    }
}
