//! Computational grid, field sampling, quadrature and discrete convolution.
//!
//! The domain is the cube [-L, L]^d (d = 1 or 2) sampled on a uniform grid
//! with Dirichlet truncation. Every field, operator and functional in the
//! crate uses the quadrature weight `spacing^dim` of this grid, so that
//! algebraic identities between functionals hold exactly at the discrete
//! level.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Uniform symmetric grid on [-L, L]^dim with Dirichlet boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
    spacing: f64,
    axis: Vec<f64>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    /// Node coordinates along one axis.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }
    /// Total number of nodes, `points_per_axis^dim`.
    pub fn n_nodes(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }
    /// Quadrature weight per node, `spacing^dim`.
    pub fn weight(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinates of node `i` (flattened row-major for dim 2).
    pub fn coord(&self, i: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.axis[i], 0.0],
            _ => {
                let n = self.points_per_axis;
                [self.axis[i / n], self.axis[i % n]]
            }
        }
    }

    /// Index of the node closest to the given point.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let pick = |v: f64| -> usize {
            let k = ((v + self.half_width) / self.spacing).round();
            (k.max(0.0) as usize).min(self.points_per_axis - 1)
        };
        match self.dim {
            1 => pick(x[0]),
            _ => pick(x[0]) * self.points_per_axis + pick(x.get(1).copied().unwrap_or(0.0)),
        }
    }

    /// True if the node lies on the boundary of the truncated box.
    pub fn is_boundary(&self, i: usize) -> bool {
        let n = self.points_per_axis;
        match self.dim {
            1 => i == 0 || i == n - 1,
            _ => {
                let (ix, iy) = (i / n, i % n);
                ix == 0 || ix == n - 1 || iy == 0 || iy == n - 1
            }
        }
    }
}

/// Builds a uniform symmetric grid; `spacing = 2 L / (n - 1)`.
pub fn build_grid(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Arc<Grid>> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidArgument(format!("dim must be 1 or 2, got {dim}")));
    }
    if points_per_axis < 3 {
        return Err(Error::InvalidArgument(format!(
            "points_per_axis must be >= 3, got {points_per_axis}"
        )));
    }
    if !(half_width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "half_width must be > 0, got {half_width}"
        )));
    }
    let n = points_per_axis;
    let spacing = 2.0 * half_width / (n - 1) as f64;
    let axis: Vec<f64> = (0..n).map(|k| -half_width + k as f64 * spacing).collect();
    Ok(Arc::new(Grid {
        dim,
        half_width,
        points_per_axis,
        spacing,
        axis,
    }))
}

/// Nonnegative density field on the grid (particles per volume).
#[derive(Debug, Clone)]
pub struct Density {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Density {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::ShapeMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| **v < -1e-12) {
            return Err(Error::InvalidArgument(format!("negative density entry {v}")));
        }
        let values = values.into_iter().map(|v| v.max(0.0)).collect();
        Ok(Density { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_nodes();
        Density {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..grid.n_nodes())
            .map(|i| {
                let c = grid.coord(i);
                f(&c[..grid.dim()])
            })
            .collect();
        Density::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass under grid quadrature.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.weight()
    }

    /// Weighted L1 distance to another density on the same grid.
    pub fn l1_distance(&self, other: &Density) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.weight()
    }

    pub fn l1_norm(&self) -> f64 {
        self.mass()
    }
}

/// External confining potential V.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    /// k |x|^2
    Harmonic { k: f64 },
    /// a |x|^4
    Quartic { a: f64 },
    /// a (|x|^2 - b^2)^2
    DoubleWell { a: f64, b: f64 },
    /// Two-column table (coordinate, value), 1D, linearly interpolated.
    Tabulated { xs: Vec<f64>, vs: Vec<f64> },
}

impl PotentialSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            PotentialSpec::Harmonic { k } => k * r2,
            PotentialSpec::Quartic { a } => a * r2 * r2,
            PotentialSpec::DoubleWell { a, b } => {
                let s = r2 - b * b;
                a * s * s
            }
            PotentialSpec::Tabulated { xs, vs } => interp1(xs, vs, x[0]),
        }
    }

    /// Loads a tabulated potential from two-column text (coordinate, value).
    pub fn from_table_text(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad table row at line {}", lineno + 1)))?;
            let v: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad table row at line {}", lineno + 1)))?;
            xs.push(x);
            vs.push(v);
        }
        if xs.len() < 2 {
            return Err(Error::Config("table needs at least two rows".into()));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("table coordinates must be strictly increasing".into()));
        }
        Ok(PotentialSpec::Tabulated { xs, vs })
    }
}

fn interp1(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return vs[0];
    }
    if x >= xs[xs.len() - 1] {
        return vs[vs.len() - 1];
    }
    let j = xs.partition_point(|&t| t <= x).min(xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    vs[j - 1] * (1.0 - t) + vs[j] * t
}

/// Which sufficient condition for a well-posed interaction to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepulsivityMode {
    /// Nonnegative discrete Fourier transform of the sampled kernel.
    FourierNonneg,
    /// Smallness of the negative part of the transform (d = 1, 2 alternative).
    SmallnessD12,
}

/// Even pair interaction kernel w.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InteractionKind {
    /// a exp(-|x|^2 / (2 sigma^2))
    Gaussian { a: f64, sigma: f64 },
    /// a exp(-|x| / mu)
    Exponential { a: f64, mu: f64 },
    /// Radial table (|x|, value), even by construction.
    TabulatedEven { rs: Vec<f64>, vs: Vec<f64> },
    /// Constant kernel (test-only); c = 0 gives the non-interacting model.
    Constant { c: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InteractionSpec {
    #[serde(flatten)]
    pub kind: InteractionKind,
    pub repulsivity_mode: RepulsivityMode,
}

impl InteractionSpec {
    pub fn gaussian(a: f64, sigma: f64) -> Self {
        InteractionSpec {
            kind: InteractionKind::Gaussian { a, sigma },
            repulsivity_mode: RepulsivityMode::FourierNonneg,
        }
    }

    /// The non-interacting kernel w = 0.
    pub fn none() -> Self {
        InteractionSpec {
            kind: InteractionKind::Constant { c: 0.0 },
            repulsivity_mode: RepulsivityMode::FourierNonneg,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, InteractionKind::Constant { c } if c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match &self.kind {
            InteractionKind::Gaussian { a, sigma } => a * (-r2 / (2.0 * sigma * sigma)).exp(),
            InteractionKind::Exponential { a, mu } => a * (-r2.sqrt() / mu).exp(),
            InteractionKind::TabulatedEven { rs, vs } => interp1(rs, vs, r2.sqrt()),
            InteractionKind::Constant { c } => *c,
        }
    }
}

/// Per-axis displacement table of a kernel on a grid: values w(x_i - x_j)
/// indexed by axis offsets, shared by convolution, direct and exchange sums.
#[derive(Debug, Clone)]
pub struct KernelTable {
    dim: usize,
    n: usize,
    /// (2n-1)^dim values, row-major over axis offsets shifted by n-1.
    values: Vec<f64>,
}

impl KernelTable {
    pub fn build(w: &InteractionSpec, grid: &Grid) -> Self {
        let n = grid.points_per_axis();
        let m = 2 * n - 1;
        let dx = grid.spacing();
        let off = |k: usize| (k as isize - (n as isize - 1)) as f64 * dx;
        let values = match grid.dim() {
            1 => (0..m).map(|k| w.eval(&[off(k)])).collect(),
            _ => (0..m * m)
                .map(|km| w.eval(&[off(km / m), off(km % m)]))
                .collect(),
        };
        KernelTable {
            dim: grid.dim(),
            n,
            values,
        }
    }

    /// w(x_i - x_j) for flattened node indices i, j.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        match self.dim {
            1 => self.values[(i + n - 1) - j],
            _ => {
                let m = 2 * n - 1;
                let (ix, iy) = (i / n, i % n);
                let (jx, jy) = (j / n, j % n);
                self.values[((ix + n - 1) - jx) * m + ((iy + n - 1) - jy)]
            }
        }
    }

    pub fn value_at_zero(&self) -> f64 {
        let n = self.n;
        match self.dim {
            1 => self.values[n - 1],
            _ => self.values[(n - 1) * (2 * n - 1) + (n - 1)],
        }
    }

    /// Displacement samples along offsets, ordered for circulant embedding:
    /// index j holds offset j for j < n, offset j - (2n-1) otherwise.
    fn circulant_axis(&self, row: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = 2 * n - 1;
        (0..m)
            .map(|j| {
                let k = if j < n { j + n - 1 } else { j - n };
                row[k]
            })
            .collect()
    }
}

/// Full problem definition: grid, hbar, potentials and coupling.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub grid: Arc<Grid>,
    pub hbar: f64,
    pub potential: PotentialSpec,
    pub interaction: InteractionSpec,
    /// Chemical potential E; the solvers work with the shifted potential V - E.
    pub energy: f64,
    /// Coupling multiplying the interaction terms (default 1).
    pub lambda: f64,
}

impl ModelSpec {
    pub fn new(
        grid: Arc<Grid>,
        hbar: f64,
        potential: PotentialSpec,
        interaction: InteractionSpec,
        energy: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be > 0, got {hbar}")));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(ModelSpec {
            grid,
            hbar,
            potential,
            interaction,
            energy,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// V(x_i) - E sampled on the nodes.
    pub fn shifted_potential(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.n_nodes())
            .map(|i| {
                let c = g.coord(i);
                self.potential.eval(&c[..g.dim()]) - self.energy
            })
            .collect()
    }

    pub fn kernel_table(&self) -> KernelTable {
        KernelTable::build(&self.interaction, &self.grid)
    }

    /// hbar^dim
    pub fn hbar_d(&self) -> f64 {
        self.hbar.powi(self.dim() as i32)
    }
}

/// Discrete convolution (w * f)(x_i) = sum_j w(x_i - x_j) f_j dx^dim.
///
/// Full quadrature sum of the sampled kernel, no periodic wraparound.
pub fn convolve(f: &[f64], w: &InteractionSpec, grid: &Grid) -> Result<Vec<f64>> {
    if f.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch {
            expected: grid.n_nodes(),
            got: f.len(),
        });
    }
    let table = KernelTable::build(w, grid);
    Ok(convolve_with_table(f, &table, grid))
}

/// Convolution against a prebuilt kernel table.
pub fn convolve_with_table(f: &[f64], table: &KernelTable, grid: &Grid) -> Vec<f64> {
    let nn = grid.n_nodes();
    let weight = grid.weight();
    let mut out = vec![0.0; nn];
    for i in 0..nn {
        let mut acc = 0.0;
        for (j, fj) in f.iter().enumerate() {
            acc += table.get(i, j) * fj;
        }
        out[i] = acc * weight;
    }
    out
}

/// Outcome of one validation check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub value: f64,
}

/// Structured validation report; never aborts.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Tolerances and configured constants for `validate_model`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Allowed negativity of the discrete Fourier transform of w.
    pub tol_fourier: f64,
    /// Kinetic Lieb-Thirring constant for d = 2; only upper bounds are
    /// known in closed form, so this is a config input.
    pub lieb_thirring_2d: f64,
    /// Required margin V(boundary) - E for confinement.
    pub min_confinement_margin: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            tol_fourier: 1e-10,
            lieb_thirring_2d: 1.456, // placeholder upper bound; override per model
            min_confinement_margin: 1.0,
        }
    }
}

/// Checks evenness of w, the configured repulsivity condition, and the
/// confinement margin of V over the truncated domain.
pub fn validate_model(m: &ModelSpec, cfg: &ValidationConfig) -> ValidationReport {
    let mut checks = Vec::new();
    let grid = &m.grid;
    let table = m.kernel_table();
    let n = grid.points_per_axis();
    let mm = 2 * n - 1;

    // Evenness on sampled displacement nodes.
    let mut even_dev: f64 = 0.0;
    match grid.dim() {
        1 => {
            for k in 0..mm {
                even_dev = even_dev.max((table.values[k] - table.values[mm - 1 - k]).abs());
            }
        }
        _ => {
            for kx in 0..mm {
                for ky in 0..mm {
                    let a = table.values[kx * mm + ky];
                    let b = table.values[(mm - 1 - kx) * mm + (mm - 1 - ky)];
                    even_dev = even_dev.max((a - b).abs());
                }
            }
        }
    }
    checks.push(CheckResult {
        name: "evenness".into(),
        passed: even_dev <= 1e-12,
        detail: format!("max |w(x) - w(-x)| over sampled nodes = {even_dev:.3e}"),
        value: even_dev,
    });

    // Fourier transform of the sampled kernel (circulant embedding spectrum).
    let dft = kernel_dft(&table);
    let min_dft = dft.iter().cloned().fold(f64::INFINITY, f64::min);
    match m.interaction.repulsivity_mode {
        RepulsivityMode::FourierNonneg => {
            checks.push(CheckResult {
                name: "fourier-nonneg".into(),
                passed: min_dft >= -cfg.tol_fourier,
                detail: format!("min DFT of sampled w = {min_dft:.3e} (tol {:.1e})", cfg.tol_fourier),
                value: min_dft,
            });
        }
        RepulsivityMode::SmallnessD12 => {
            // sup of the negative part of the continuous transform,
            // approximated on the DFT frequencies.
            let w_hat_neg = (-min_dft).max(0.0) * grid.weight();
            let threshold = match grid.dim() {
                1 => 0.5 / (2.0 * std::f64::consts::PI.sqrt()),
                _ => {
                    let clt = cfg.lieb_thirring_2d;
                    0.5 / (2.0 * std::f64::consts::PI * clt * clt)
                }
            };
            checks.push(CheckResult {
                name: "smallness-d12".into(),
                passed: w_hat_neg < threshold,
                detail: format!(
                    "||(w_hat)_-||_inf ~= {w_hat_neg:.3e}, threshold {threshold:.3e}"
                ),
                value: w_hat_neg,
            });
        }
    }

    // Confinement margin min over boundary nodes of V - E.
    let shifted = m.shifted_potential();
    let margin = (0..grid.n_nodes())
        .filter(|&i| grid.is_boundary(i))
        .map(|i| shifted[i])
        .fold(f64::INFINITY, f64::min);
    checks.push(CheckResult {
        name: "confinement".into(),
        passed: margin >= cfg.min_confinement_margin,
        detail: format!(
            "min boundary V - E = {margin:.6} (required >= {})",
            cfg.min_confinement_margin
        ),
        value: margin,
    });

    ValidationReport { checks }
}

/// Real spectrum of the circulant embedding of the sampled kernel; its
/// nonnegativity is sufficient for D_w >= 0 on grid densities.
pub fn kernel_dft(table: &KernelTable) -> Vec<f64> {
    let n = table.n;
    let m = 2 * n - 1;
    match table.dim {
        1 => {
            let c = table.circulant_axis(&table.values);
            dft_real(&c)
        }
        _ => {
            // Row-column transform of the (2n-1)^2 displacement samples.
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
            for kx in 0..m {
                let row = &table.values[kx * m..(kx + 1) * m];
                rows.push(table.circulant_axis(row));
            }
            // Transform along y for each x-offset row.
            let rows_y: Vec<Vec<f64>> = rows.iter().map(|r| dft_real(r)).collect();
            // Reorder x-offsets into circulant order and transform along x.
            let mut out = vec![0.0; m * m];
            for fy in 0..m {
                let col: Vec<f64> = (0..m)
                    .map(|j| {
                        let k = if j < n { j + n - 1 } else { j - n };
                        rows_y[k][fy]
                    })
                    .collect();
                let fx = dft_real(&col);
                for (i, v) in fx.into_iter().enumerate() {
                    out[i * m + fy] = v;
                }
            }
            out
        }
    }
}

/// Naive real DFT of an even real sequence: returns Re F_k.
fn dft_real(c: &[f64]) -> Vec<f64> {
    let m = c.len();
    let base = -2.0 * std::f64::consts::PI / m as f64;
    (0..m)
        .map(|k| {
            c.iter()
                .enumerate()
                .map(|(j, cj)| cj * (base * (j * k) as f64).cos())
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_arithmetic() {
        let g = build_grid(1, 8.0, 5).unwrap();
        assert_eq!(g.axis(), &[-8.0, -4.0, 0.0, 4.0, 8.0]);
        assert_eq!(g.spacing(), 4.0);
        let g = build_grid(1, 1.0, 3).unwrap();
        assert_eq!(g.axis(), &[-1.0, 0.0, 1.0]);
        assert_eq!(g.spacing(), 1.0);
        let g = build_grid(2, 1.0, 3).unwrap();
        assert_eq!(g.n_nodes(), 9);
        assert_eq!(g.weight(), 1.0);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(build_grid(1, 1.0, 2).is_err());
        assert!(build_grid(1, 0.0, 5).is_err());
        assert!(build_grid(3, 1.0, 5).is_err());
    }

    #[test]
    fn convolve_sifts_point_mass() {
        let g = build_grid(1, 4.0, 33).unwrap();
        let w = InteractionSpec::gaussian(1.3, 0.7);
        let k = 10;
        let mut f = vec![0.0; g.n_nodes()];
        f[k] = 1.0 / g.weight();
        let out = convolve(&f, &w, &g).unwrap();
        for i in 0..g.n_nodes() {
            let expected = w.eval(&[g.axis()[i] - g.axis()[k]]);
            assert_abs_diff_eq!(out[i], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn convolve_constant_kernel() {
        let g = build_grid(1, 3.0, 21).unwrap();
        let w = InteractionSpec {
            kind: InteractionKind::Constant { c: 2.5 },
            repulsivity_mode: RepulsivityMode::FourierNonneg,
        };
        let f: Vec<f64> = (0..g.n_nodes()).map(|i| (i as f64 * 0.3).sin().abs()).collect();
        let mass: f64 = f.iter().sum::<f64>() * g.weight();
        let out = convolve(&f, &w, &g).unwrap();
        for v in out {
            assert_abs_diff_eq!(v, 2.5 * mass, epsilon = 1e-10);
        }
    }

    #[test]
    fn convolve_gaussian_closed_form() {
        // Gaussian * Gaussian is Gaussian with added variances; checked
        // against independent evaluation of the closed form.
        let g = build_grid(1, 12.0, 601).unwrap();
        let s1: f64 = 0.8;
        let s2: f64 = 0.6;
        let w = InteractionSpec::gaussian(1.0, s1);
        let f: Vec<f64> = g
            .axis()
            .iter()
            .map(|&x| (-x * x / (2.0 * s2 * s2)).exp())
            .collect();
        let out = convolve(&f, &w, &g).unwrap();
        let s = (s1 * s1 + s2 * s2).sqrt();
        let amp = (2.0 * std::f64::consts::PI).sqrt() * s1 * s2 / s;
        for (i, &x) in g.axis().iter().enumerate() {
            if x.abs() < 6.0 {
                let expected = amp * (-x * x / (2.0 * s * s)).exp();
                assert!((out[i] - expected).abs() < 1e-6, "x={x} got {} want {expected}", out[i]);
            }
        }
    }

    #[test]
    fn convolve_matches_direct_quadrature() {
        let g = build_grid(2, 2.0, 9).unwrap();
        let w = InteractionSpec::gaussian(0.9, 1.1);
        let f: Vec<f64> = (0..g.n_nodes()).map(|i| ((i * 7 % 13) as f64) / 13.0).collect();
        let fast = convolve(&f, &w, &g).unwrap();
        for i in 0..g.n_nodes() {
            let ci = g.coord(i);
            let direct: f64 = (0..g.n_nodes())
                .map(|j| {
                    let cj = g.coord(j);
                    w.eval(&[ci[0] - cj[0], ci[1] - cj[1]]) * f[j]
                })
                .sum::<f64>()
                * g.weight();
            let rel = (fast[i] - direct).abs() / direct.abs().max(1e-300);
            assert!(rel < 1e-10);
        }
    }

    #[test]
    fn convolve_commutes_with_reflection() {
        let g = build_grid(1, 2.0, 41).unwrap();
        let w = InteractionSpec::gaussian(1.0, 0.5);
        let f: Vec<f64> = (0..g.n_nodes()).map(|i| (i as f64).cos().abs()).collect();
        let out = convolve(&f, &w, &g).unwrap();
        let reflected: Vec<f64> = f.iter().rev().cloned().collect();
        let out_r = convolve(&reflected, &w, &g).unwrap();
        for i in 0..g.n_nodes() {
            assert_abs_diff_eq!(out[g.n_nodes() - 1 - i], out_r[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn validate_gaussian_passes_fourier() {
        let g = build_grid(1, 6.0, 101).unwrap();
        let m = ModelSpec::new(
            g,
            0.1,
            PotentialSpec::Harmonic { k: 1.0 },
            InteractionSpec::gaussian(1.0, 1.0),
            1.0,
            1.0,
        )
        .unwrap();
        let report = validate_model(&m, &ValidationConfig::default());
        assert!(report.is_valid(), "{report:?}");
    }

    #[test]
    fn validate_negative_gaussian_fails_fourier() {
        let g = build_grid(1, 6.0, 101).unwrap();
        let m = ModelSpec::new(
            g,
            0.1,
            PotentialSpec::Harmonic { k: 1.0 },
            InteractionSpec::gaussian(-1.0, 1.0 / std::f64::consts::SQRT_2),
            1.0,
            1.0,
        )
        .unwrap();
        let report = validate_model(&m, &ValidationConfig::default());
        let fourier = report.checks.iter().find(|c| c.name == "fourier-nonneg").unwrap();
        assert!(!fourier.passed);
    }

    #[test]
    fn validate_confinement_margin() {
        let g = build_grid(1, 6.0, 61).unwrap();
        let m = ModelSpec::new(
            g,
            0.1,
            PotentialSpec::Harmonic { k: 1.0 },
            InteractionSpec::none(),
            1.0,
            1.0,
        )
        .unwrap();
        let report = validate_model(&m, &ValidationConfig::default());
        let conf = report.checks.iter().find(|c| c.name == "confinement").unwrap();
        assert_abs_diff_eq!(conf.value, 35.0, epsilon = 1e-12);
        assert!(conf.passed);
    }

    #[test]
    fn tabulated_potential_roundtrip() {
        let text = "# x V\n-2.0 4.0\n0.0 0.0\n2.0 4.0\n";
        let p = PotentialSpec::from_table_text(text).unwrap();
        assert_abs_diff_eq!(p.eval(&[1.0]), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eval(&[-1.0]), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fourier_quadratic_form_bound() {
        // For fourier-nonneg validated w the quadratic form on nonnegative
        // fields is bounded below by -tol * |f|_1^2.
        let g = build_grid(1, 4.0, 41).unwrap();
        let w = InteractionSpec::gaussian(1.0, 0.8);
        let table = KernelTable::build(&w, &g);
        let dft = kernel_dft(&table);
        assert!(dft.iter().all(|&v| v >= -1e-10));
        let mut state: u64 = 12345;
        for _ in 0..50 {
            let f: Vec<f64> = (0..g.n_nodes())
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 33) as f64 / (1u64 << 31) as f64).abs()
                })
                .collect();
            let mut q = 0.0;
            for i in 0..f.len() {
                for j in 0..f.len() {
                    q += f[i] * f[j] * table.get(i, j);
                }
            }
            q *= g.weight() * g.weight();
            let l1: f64 = f.iter().sum::<f64>() * g.weight();
            assert!(q >= -1e-10 * l1 * l1);
        }
    }
}
