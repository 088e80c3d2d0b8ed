//! Random log-normal permeability fields and the manipulations the studies
//! need: variance rescaling, lower-left truncation, resampling onto coarser
//! grids and flat file import/export.
//!
//! Fields are sampled by circulant embedding: the covariance is evaluated on a
//! periodic grid twice the size of the target in each direction, its discrete
//! spectrum filters complex white noise and the lower-left block of the real
//! part is kept.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{CellField, Grid2D};
use crate::multiscale::cell_overlaps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationModel {
    Gaussian,
    #[default]
    PowerLaw,
}

impl std::str::FromStr for CorrelationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "power-law" | "powerlaw" | "power" => Ok(Self::PowerLaw),
            other => Err(Error::InvalidArgument(format!(
                "unknown correlation model '{other}'"
            ))),
        }
    }
}

/// Statistics of the log-permeability. `lambda` is the symmetric positive
/// definite matrix of inverse squared cutoff lengths with any rotation folded in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub model: CorrelationModel,
    pub lambda: [[f64; 2]; 2],
    pub log_mean: f64,
    pub log_variance: f64,
}

impl CorrelationSpec {
    pub fn new(
        model: CorrelationModel,
        lambda: [[f64; 2]; 2],
        log_mean: f64,
        log_variance: f64,
    ) -> Result<Self> {
        let spec = Self {
            model,
            lambda,
            log_mean,
            log_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Cutoff lengths `l1` along the direction at `angle` radians from the x
    /// axis and `l2` across it.
    pub fn from_cutoffs(
        model: CorrelationModel,
        l1: f64,
        l2: f64,
        angle: f64,
        log_mean: f64,
        log_variance: f64,
    ) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(Error::NotSpd);
        }
        let (s, c) = angle.sin_cos();
        let (a, b) = (1.0 / (l1 * l1), 1.0 / (l2 * l2));
        // R^T diag(a, b) R with R = [[c, s], [-s, c]]
        let lambda = [
            [a * c * c + b * s * s, (a - b) * c * s],
            [(a - b) * c * s, a * s * s + b * c * c],
        ];
        Self::new(model, lambda, log_mean, log_variance)
    }

    pub fn validate(&self) -> Result<()> {
        let [[a, b], [c, d]] = self.lambda;
        let finite = [a, b, c, d].iter().all(|v| v.is_finite());
        if !finite
            || (b - c).abs() > 1e-12 * (a.abs() + d.abs())
            || !(a > 0.0)
            || !(a * d - b * c > 0.0)
        {
            return Err(Error::NotSpd);
        }
        if !(self.log_variance >= 0.0)
            || !self.log_mean.is_finite()
            || !self.log_variance.is_finite()
        {
            return Err(Error::InvalidArgument(format!(
                "log variance must be finite and non-negative, got {}",
                self.log_variance
            )));
        }
        Ok(())
    }

    /// `s^T Lambda s`.
    pub fn quadratic_form(&self, s: [f64; 2]) -> f64 {
        let [[a, b], [c, d]] = self.lambda;
        s[0] * (a * s[0] + b * s[1]) + s[1] * (c * s[0] + d * s[1])
    }

    fn kernel_unchecked(&self, s: [f64; 2]) -> f64 {
        let q = self.quadratic_form(s);
        match self.model {
            CorrelationModel::PowerLaw => (1.0 + q).powf(-0.25),
            CorrelationModel::Gaussian => (-q).exp(),
        }
    }

    /// Largest cutoff length, i.e. `1 / sqrt(smallest eigenvalue of Lambda)`.
    pub fn max_cutoff(&self) -> f64 {
        let [[a, b], [_, d]] = self.lambda;
        let tr = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        1.0 / (tr - disc).sqrt()
    }
}

/// Correlation between two points at separation `s`, in `(0, 1]`.
pub fn correlation_kernel(spec: &CorrelationSpec, s: [f64; 2]) -> Result<f64> {
    spec.validate()?;
    Ok(spec.kernel_unchecked(s))
}

/// In-place 2-D FFT of a row-major `n0 x n1` array (n0 columns per row).
fn fft2(data: &mut [Complex64], n0: usize, n1: usize, planner: &mut FftPlanner<f64>) {
    let row = planner.plan_fft_forward(n0);
    row.process(data);
    let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
    for j in 0..n1 {
        for i in 0..n0 {
            t[i * n1 + j] = data[j * n0 + i];
        }
    }
    let col = planner.plan_fft_forward(n1);
    col.process(&mut t);
    for j in 0..n1 {
        for i in 0..n0 {
            data[j * n0 + i] = t[i * n1 + j];
        }
    }
}

/// Sample `exp(g)` where `g` is a stationary Gaussian field with covariance
/// `log_variance * kernel`. The sampled log field is shifted and scaled so its
/// empirical mean and variance equal the spec exactly; without that step the
/// empirical variance of a long-range (power-law) field on a finite domain
/// falls well short of the nominal value.
pub fn generate_lognormal_field(
    grid: Grid2D,
    spec: &CorrelationSpec,
    seed: u64,
) -> Result<CellField> {
    spec.validate()?;
    if spec.log_variance == 0.0 {
        return Ok(CellField::constant(grid, spec.log_mean.exp()));
    }
    let cutoff = spec.max_cutoff();
    if cutoff > grid.width().min(grid.height()) {
        log::warn!(
            "correlation cutoff {cutoff:.3e} exceeds the domain ({:.3e} x {:.3e})",
            grid.width(),
            grid.height()
        );
    }

    let (m0, m1) = (2 * grid.nx, 2 * grid.ny);
    let m = m0 * m1;
    let mut planner = FftPlanner::new();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
    // Signed minimum-image separations on the torus.
    let wrap = |i: usize, n: usize| {
        if i <= n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        }
    };
    for j in 0..m1 {
        let sy = wrap(j, m1) * grid.dy;
        for i in 0..m0 {
            let sx = wrap(i, m0) * grid.dx;
            spectrum[j * m0 + i] = Complex64::new(spec.kernel_unchecked([sx, sy]), 0.0);
        }
    }
    fft2(&mut spectrum, m0, m1, &mut planner);

    let total = spectrum.iter().map(|c| c.re.abs()).sum::<f64>();
    let negative = spectrum
        .iter()
        .filter(|c| c.re < 0.0)
        .map(|c| -c.re)
        .sum::<f64>();
    if negative > 1e-10 * total {
        log::warn!(
            "circulant embedding: clamped negative spectrum (relative mass {:.2e})",
            negative / total
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / m as f64;
    for c in spectrum.iter_mut() {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let amp = (c.re.max(0.0) * scale).sqrt();
        *c = Complex64::new(amp * a, amp * b);
    }
    fft2(&mut spectrum, m0, m1, &mut planner);

    let mut g: Vec<f64> = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        g.extend(spectrum[j * m0..j * m0 + grid.nx].iter().map(|c| c.re));
    }
    let (mean, var) = mean_var(&g);
    if !(var > 0.0) {
        return Err(Error::InvalidArgument(
            "sampled log field is constant".into(),
        ));
    }
    let s = (spec.log_variance / var).sqrt();
    CellField::new(
        grid,
        g.iter()
            .map(|v| ((v - mean) * s + spec.log_mean).exp())
            .collect(),
    )
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Mean and (population) variance of `ln K`.
pub fn log_stats(field: &CellField) -> Result<(f64, f64)> {
    if field.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "field must be strictly positive".into(),
        ));
    }
    let logs: Vec<f64> = field.values.iter().map(|v| v.ln()).collect();
    Ok(mean_var(&logs))
}

/// Scale `ln K` about its mean to reach `target` variance.
pub fn rescale_log_variance(field: &CellField, target: f64) -> Result<CellField> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "target variance must be non-negative, got {target}"
        )));
    }
    let (mean, var) = log_stats(field)?;
    if target == 0.0 {
        return Ok(CellField::constant(field.grid, mean.exp()));
    }
    if var <= 1e-24 * (1.0 + mean * mean) {
        return Err(Error::InvalidArgument(
            "cannot rescale a constant field to a positive variance".into(),
        ));
    }
    let s = (target / var).sqrt();
    CellField::new(
        field.grid,
        field
            .values
            .iter()
            .map(|v| ((v.ln() - mean) * s + mean).exp())
            .collect(),
    )
}

/// The lower-left `nx x ny` block, copied without resampling.
pub fn extract_subgrid(field: &CellField, nx: usize, ny: usize) -> Result<CellField> {
    let g = field.grid;
    if nx == 0 || ny == 0 || nx > g.nx || ny > g.ny {
        return Err(Error::InvalidArgument(format!(
            "subgrid {nx}x{ny} outside field {}x{}",
            g.nx, g.ny
        )));
    }
    let sub = Grid2D::new(nx, ny, g.dx, g.dy)?;
    let mut values = Vec::with_capacity(sub.len());
    for j in 0..ny {
        values.extend_from_slice(&field.values[j * g.nx..j * g.nx + nx]);
    }
    CellField::new(sub, values)
}

/// Area-weighted average of `ln K` onto `target`, which must cover the same
/// physical rectangle.
pub fn interpolate_to_grid(field: &CellField, target: Grid2D) -> Result<CellField> {
    let g = field.grid;
    if !g.same_extent(&target) {
        return Err(Error::InvalidArgument(
            "target grid must cover the same domain".into(),
        ));
    }
    if field.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "field must be strictly positive".into(),
        ));
    }
    let ox = cell_overlaps(g.nx, g.dx, target.nx, target.dx);
    let oy = cell_overlaps(g.ny, g.dy, target.ny, target.dy);
    let logs: Vec<f64> = field.values.iter().map(|v| v.ln()).collect();
    let mut out = Vec::with_capacity(target.len());
    for rows in &oy {
        for cols in &ox {
            let (mut s, mut w) = (0.0, 0.0);
            for &(j, hy) in rows {
                for &(i, hx) in cols {
                    s += hx * hy * logs[g.idx(i, j)];
                    w += hx * hy;
                }
            }
            out.push((s / w).exp());
        }
    }
    CellField::new(target, out)
}

/// Magic bytes of the binary field format.
pub const FIELD_MAGIC: [u8; 8] = *b"MSCGFLD\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFormat {
    Binary,
    Csv,
}

impl std::str::FromStr for FieldFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bin" => Ok(Self::Binary),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown field format '{other}'"
            ))),
        }
    }
}

/// Binary layout: 8 magic bytes, `nx` and `ny` as little-endian u32, then
/// `nx * ny` little-endian f64 values in row-major order.
pub fn write_field_binary<W: Write>(field: &CellField, mut w: W) -> Result<()> {
    let g = field.grid;
    let (nx, ny) = (u32::try_from(g.nx), u32::try_from(g.ny));
    let (Ok(nx), Ok(ny)) = (nx, ny) else {
        return Err(Error::Format("grid too large for the binary header".into()));
    };
    w.write_all(&FIELD_MAGIC)?;
    w.write_all(&nx.to_le_bytes())?;
    w.write_all(&ny.to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_binary<R: Read>(mut r: R, dx: f64, dy: f64) -> Result<CellField> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if header[..8] != FIELD_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let nx = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let grid = Grid2D::new(nx, ny, dx, dy)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    check_len(grid.len() * 8, bytes.len())
        .map_err(|_| Error::Format(format!("expected {} values", grid.len())))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    CellField::new(grid, values)
}

/// One CSV record per grid row, bottom row (`j = 0`) first.
pub fn write_field_csv<W: Write>(field: &CellField, w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let nx = field.grid.nx;
    for row in field.values.chunks(nx) {
        wr.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_field_csv<R: Read>(r: R, dx: f64, dy: f64) -> Result<CellField> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut values = Vec::new();
    let (mut nx, mut ny) = (0, 0);
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if ny == 0 {
            nx = rec.len();
        } else if rec.len() != nx {
            return Err(Error::Format(format!(
                "row {ny} has {} columns, expected {nx}",
                rec.len()
            )));
        }
        for s in rec.iter() {
            values.push(
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("'{s}': {e}")))?,
            );
        }
        ny += 1;
    }
    CellField::new(Grid2D::new(nx, ny, dx, dy)?, values)
}

pub fn export_field(field: &CellField, path: &Path, format: FieldFormat) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match format {
        FieldFormat::Binary => write_field_binary(field, w),
        FieldFormat::Csv => write_field_csv(field, w),
    }
}

/// Cell sizes are not stored in either format and must be supplied.
pub fn import_field(path: &Path, format: FieldFormat, dx: f64, dy: f64) -> Result<CellField> {
    let r = BufReader::new(File::open(path)?);
    match format {
        FieldFormat::Binary => read_field_binary(r, dx, dy),
        FieldFormat::Csv => read_field_csv(r, dx, dy),
    }
}
