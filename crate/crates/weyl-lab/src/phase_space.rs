//! Coherent states, Husimi transforms, and the bathtub lift between
//! Thomas-Fermi densities and Vlasov phase-space occupations.
//!
//! This is the only module that touches complex phases; they are folded into
//! real cosine/sine envelopes so the rest of the crate stays real.

use crate::energies::TfConstants;
use crate::lattice::{Density, Grid, ModelSpec};
use crate::operators::DensityMatrix;
use crate::{Error, Result};
use rayon::prelude::*;
use std::sync::Arc;

/// Occupancy slack allowed on Husimi fields.
pub const TOL_OCC: f64 = 1e-9;

/// Product grid: spatial nodes times a uniform symmetric momentum axis.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    spatial: Arc<Grid>,
    xi_axis: Vec<f64>,
    xi_half_width: f64,
    xi_spacing: f64,
}

impl PhaseGrid {
    pub fn new(spatial: Arc<Grid>, xi_half_width: f64, n_xi: usize) -> Result<Self> {
        if n_xi < 3 || !(xi_half_width > 0.0) {
            return Err(Error::InvalidArgument("need n_xi >= 3 and positive momentum half-width".into()));
        }
        let xi_spacing = 2.0 * xi_half_width / (n_xi - 1) as f64;
        let xi_axis = (0..n_xi)
            .map(|k| -xi_half_width + k as f64 * xi_spacing)
            .collect();
        Ok(PhaseGrid {
            spatial,
            xi_axis,
            xi_half_width,
            xi_spacing,
        })
    }

    /// Default momentum cutoff 2 sqrt(max(E - min V, 1)), so the Fermi ball
    /// is interior.
    pub fn for_model(m: &ModelSpec, n_xi: usize) -> Result<Self> {
        let shifted = m.shifted_potential();
        let depth = shifted
            .iter()
            .map(|v| -v)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(1.0);
        PhaseGrid::new(m.grid.clone(), 2.0 * depth.sqrt(), n_xi)
    }

    pub fn spatial(&self) -> &Arc<Grid> {
        &self.spatial
    }
    pub fn xi_axis(&self) -> &[f64] {
        &self.xi_axis
    }
    pub fn xi_half_width(&self) -> f64 {
        self.xi_half_width
    }
    pub fn xi_spacing(&self) -> f64 {
        self.xi_spacing
    }
    pub fn n_xi_per_axis(&self) -> usize {
        self.xi_axis.len()
    }
    /// Number of momentum nodes, n_xi^dim.
    pub fn n_xi_nodes(&self) -> usize {
        self.xi_axis.len().pow(self.spatial.dim() as u32)
    }
    /// Momentum quadrature weight per node.
    pub fn xi_weight(&self) -> f64 {
        self.xi_spacing.powi(self.spatial.dim() as i32)
    }

    /// Momentum coordinates of flattened momentum index j.
    pub fn xi_coord(&self, j: usize) -> [f64; 2] {
        match self.spatial.dim() {
            1 => [self.xi_axis[j], 0.0],
            _ => {
                let n = self.xi_axis.len();
                [self.xi_axis[j / n], self.xi_axis[j % n]]
            }
        }
    }
}

/// Where a phase-space occupation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    TransformOfGamma,
    BathtubOfRho,
    Explicit,
}

/// Phase-space occupation m(x, xi) in [0, 1] on the product grid;
/// values are stored row-major as `values[i * n_xi_nodes + j]`.
#[derive(Debug, Clone)]
pub struct HusimiField {
    pg: Arc<PhaseGrid>,
    values: Vec<f64>,
    pub provenance: Provenance,
}

impl HusimiField {
    pub fn new(pg: Arc<PhaseGrid>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let expected = pg.spatial.n_nodes() * pg.n_xi_nodes();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        let field = HusimiField {
            pg,
            values,
            provenance,
        };
        field.check_occupancy()?;
        Ok(field)
    }

    pub fn phase_grid(&self) -> &Arc<PhaseGrid> {
        &self.pg
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, spatial: usize, momentum: usize) -> f64 {
        self.values[spatial * self.pg.n_xi_nodes() + momentum]
    }

    pub fn check_occupancy(&self) -> Result<()> {
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 0.0;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo < -TOL_OCC || hi > 1.0 + TOL_OCC {
            return Err(Error::OccupancyViolation(format!(
                "m range [{lo:.6e}, {hi:.6e}] outside [0, 1] (tol {TOL_OCC:.1e})"
            )));
        }
        Ok(())
    }

    /// (2 pi)^{-d} iint |xi|^2 m dx dxi.
    pub fn kinetic_moment(&self) -> f64 {
        let d = self.pg.spatial.dim();
        let nxj = self.pg.n_xi_nodes();
        let norm = (2.0 * std::f64::consts::PI).powi(d as i32);
        let xi2: Vec<f64> = (0..nxj)
            .map(|j| {
                let c = self.pg.xi_coord(j);
                c[..d].iter().map(|v| v * v).sum()
            })
            .collect();
        let mut acc = 0.0;
        for i in 0..self.pg.spatial.n_nodes() {
            let row = &self.values[i * nxj..(i + 1) * nxj];
            acc += row.iter().zip(&xi2).map(|(m, q)| m * q).sum::<f64>();
        }
        acc * self.pg.spatial.weight() * self.pg.xi_weight() / norm
    }

    /// rho_m(x) = (2 pi)^{-d} int m(x, xi) dxi.
    pub fn spatial_density(&self) -> Density {
        let d = self.pg.spatial.dim();
        let nxj = self.pg.n_xi_nodes();
        let norm = (2.0 * std::f64::consts::PI).powi(d as i32);
        let values: Vec<f64> = (0..self.pg.spatial.n_nodes())
            .map(|i| {
                let row = &self.values[i * nxj..(i + 1) * nxj];
                (row.iter().sum::<f64>() * self.pg.xi_weight() / norm).max(0.0)
            })
            .collect();
        Density::new(self.pg.spatial.clone(), values).expect("nonnegative")
    }

    /// (2 pi)^{-d} iint m dx dxi; equals hbar^d tr gamma up to truncation for
    /// Husimi transforms.
    pub fn phase_space_mass(&self) -> f64 {
        self.spatial_density().mass()
    }

    /// Dense text dump: rows = spatial nodes, columns = momentum nodes.
    pub fn to_text(&self) -> String {
        let nxj = self.pg.n_xi_nodes();
        let mut s = String::new();
        for i in 0..self.pg.spatial.n_nodes() {
            let row = &self.values[i * nxj..(i + 1) * nxj];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }
}

/// The fixed Gaussian coherent-state window f(y) = pi^{-d/4} e^{-|y|^2/2}
/// at semiclassical scale sqrt(hbar).
#[derive(Debug, Clone, Copy)]
pub struct CoherentFamily {
    pub hbar: f64,
    pub dim: usize,
}

impl CoherentFamily {
    pub fn new(hbar: f64, dim: usize) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument("hbar must be positive".into()));
        }
        Ok(CoherentFamily { hbar, dim })
    }

    /// |grad f|^2 = d/2 for the Gaussian window.
    pub fn grad_norm_sq(&self) -> f64 {
        self.dim as f64 / 2.0
    }

    /// Envelope |f^hbar(x - y)| sampled at squared distance r2.
    #[inline]
    fn envelope(&self, r2: f64) -> f64 {
        let d = self.dim as f64;
        (std::f64::consts::PI * self.hbar).powf(-d / 4.0) * (-r2 / (2.0 * self.hbar)).exp()
    }

    /// |f^hbar|^2(y) = (pi hbar)^{-d/2} e^{-|y|^2/hbar}.
    pub fn window_squared(&self, r2: f64) -> f64 {
        let d = self.dim as f64;
        (std::f64::consts::PI * self.hbar).powf(-d / 2.0) * (-r2 / self.hbar).exp()
    }

    /// Grid-quadrature norm of the scaled window; should be 1 to ~1e-8 when
    /// sqrt(hbar) is well resolved and well inside the domain.
    pub fn window_norm(&self, grid: &Grid) -> f64 {
        let mut acc = 0.0;
        for i in 0..grid.n_nodes() {
            let c = grid.coord(i);
            let r2: f64 = c[..grid.dim()].iter().map(|v| v * v).sum();
            let e = self.envelope(r2);
            acc += e * e;
        }
        (acc * grid.weight()).sqrt()
    }
}

/// Husimi transform m(x_i, xi_j) = <f^hbar_{x,xi}, gamma f^hbar_{x,xi}>.
///
/// The Gaussian envelope is truncated at 6 sqrt(hbar); outside it the
/// squared weight is below 1e-15 and cannot move the occupancy.
pub fn husimi_transform(
    gamma: &DensityMatrix,
    fam: &CoherentFamily,
    pg: &Arc<PhaseGrid>,
) -> Result<HusimiField> {
    let grid = pg.spatial();
    if gamma.grid().n_nodes() != grid.n_nodes() {
        return Err(Error::GridMismatch("husimi_transform grid differs".into()));
    }
    let d = grid.dim();
    let hbar = fam.hbar;
    let cutoff2 = 36.0 * hbar; // (6 sqrt(hbar))^2 per radius
    let nxj = pg.n_xi_nodes();
    let sqrt_w = grid.weight().sqrt();

    let rows: Vec<Vec<f64>> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|i| {
            let xi_c = grid.coord(i);
            // Support window of the envelope around x_i.
            let mut idx = Vec::new();
            let mut env = Vec::new();
            for k in 0..grid.n_nodes() {
                let yk = grid.coord(k);
                let r2: f64 = (0..d).map(|a| (xi_c[a] - yk[a]).powi(2)).sum();
                if r2 <= cutoff2 {
                    idx.push(k);
                    env.push(fam.envelope(r2) * sqrt_w);
                }
            }
            let s = idx.len();
            // Sub-block of gamma on the support.
            let mut sub = vec![0.0; s * s];
            for (a, &ka) in idx.iter().enumerate() {
                for (b, &kb) in idx.iter().enumerate() {
                    sub[a * s + b] = gamma.matrix()[(ka, kb)];
                }
            }
            let mut row = vec![0.0; nxj];
            let mut vc = vec![0.0; s];
            let mut vs = vec![0.0; s];
            for (j, out) in row.iter_mut().enumerate() {
                let xi = pg.xi_coord(j);
                for (a, &ka) in idx.iter().enumerate() {
                    let yk = grid.coord(ka);
                    let theta: f64 = (0..d).map(|ax| xi[ax] * yk[ax]).sum::<f64>() / hbar;
                    vc[a] = env[a] * theta.cos();
                    vs[a] = env[a] * theta.sin();
                }
                let mut acc = 0.0;
                for a in 0..s {
                    let ra = &sub[a * s..(a + 1) * s];
                    let mut dc = 0.0;
                    let mut ds = 0.0;
                    for b in 0..s {
                        dc += ra[b] * vc[b];
                        ds += ra[b] * vs[b];
                    }
                    acc += vc[a] * dc + vs[a] * ds;
                }
                *out = acc;
            }
            row
        })
        .collect();

    let mut values = Vec::with_capacity(grid.n_nodes() * nxj);
    for row in rows {
        values.extend(row);
    }
    // Clip tiny negative quadrature noise; anything beyond TOL_OCC signals
    // underresolution (sqrt(hbar) must exceed ~2 dx) and is rejected by the
    // occupancy check in the constructor.
    for v in values.iter_mut() {
        if *v < 0.0 && *v >= -TOL_OCC {
            *v = 0.0;
        }
    }
    HusimiField::new(
        Arc::new(pg.as_ref().clone()),
        values,
        Provenance::TransformOfGamma,
    )
}

/// Spatial density of a Husimi field; same as `HusimiField::spatial_density`.
pub fn husimi_density(field: &HusimiField) -> Density {
    field.spatial_density()
}

/// Residuals of the kinetic and potential Husimi identities, both relative
/// to the kinetic magnitude.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KineticIdentityReport {
    pub kinetic_lhs: f64,
    pub kinetic_rhs: f64,
    pub kinetic_residual: f64,
    pub potential_lhs: f64,
    pub potential_rhs: f64,
    pub potential_residual: f64,
}

/// Checks
/// (2pi)^{-d} iint |xi|^2 m = hbar^d tr(-hbar^2 Lap gamma) + hbar^{d+1} tr(gamma) |grad f|^2
/// and the analogous potential identity with (V - E) * |f^hbar|^2.
pub fn kinetic_identity_check(
    gamma: &DensityMatrix,
    fam: &CoherentFamily,
    pg: &Arc<PhaseGrid>,
    m: &ModelSpec,
) -> Result<KineticIdentityReport> {
    let field = husimi_transform(gamma, fam, pg)?;
    let kinetic_lhs = field.kinetic_moment();
    let kin_op = crate::operators::kinetic_matrix(&m.grid, m.hbar);
    let hbar_d = m.hbar_d();
    let kinetic_rhs =
        hbar_d * kin_op.trace_against(gamma) + hbar_d * m.hbar * gamma.trace() * fam.grad_norm_sq();

    let rho_m = field.spatial_density();
    let shifted = m.shifted_potential();
    let grid = &m.grid;
    let potential_lhs = rho_m
        .values()
        .iter()
        .zip(&shifted)
        .map(|(r, v)| r * v)
        .sum::<f64>()
        * grid.weight();

    // (V - E) * |f^hbar|^2 by direct quadrature with the envelope cutoff.
    let d = grid.dim();
    let cutoff2 = 36.0 * fam.hbar;
    let rho_gamma = gamma.density();
    let smeared: Vec<f64> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|i| {
            let ci = grid.coord(i);
            let mut acc = 0.0;
            for k in 0..grid.n_nodes() {
                let ck = grid.coord(k);
                let r2: f64 = (0..d).map(|a| (ci[a] - ck[a]).powi(2)).sum();
                if r2 <= cutoff2 {
                    acc += shifted[k] * fam.window_squared(r2);
                }
            }
            acc * grid.weight()
        })
        .collect();
    let potential_rhs = hbar_d
        * rho_gamma
            .values()
            .iter()
            .zip(&smeared)
            .map(|(r, v)| r * v)
            .sum::<f64>()
        * grid.weight();

    let scale = kinetic_lhs.abs().max(1e-300);
    Ok(KineticIdentityReport {
        kinetic_lhs,
        kinetic_rhs,
        kinetic_residual: (kinetic_lhs - kinetic_rhs).abs() / scale,
        potential_lhs,
        potential_rhs,
        potential_residual: (potential_lhs - potential_rhs).abs() / scale,
    })
}

/// Lifts a spatial density to the phase-space indicator of the Fermi ball
/// |xi|^2 <= c_TF rho(x)^{2/d}, with fractional occupation of boundary cells
/// so that rho_m reproduces rho under the momentum quadrature.
pub fn bathtub_lift(
    rho: &Density,
    constants: &TfConstants,
    pg: &Arc<PhaseGrid>,
) -> Result<HusimiField> {
    let grid = pg.spatial();
    if rho.grid().n_nodes() != grid.n_nodes() {
        return Err(Error::GridMismatch("bathtub_lift grid differs".into()));
    }
    let d = grid.dim();
    let max_rho = rho.values().iter().cloned().fold(0.0, f64::max);
    let max_radius = (constants.c_tf * max_rho.powf(2.0 / d as f64)).sqrt();
    let reach = pg.xi_half_width() + 0.5 * pg.xi_spacing();
    if max_radius > reach {
        return Err(Error::MomentumGridTooSmall {
            needed: max_radius,
            have: reach,
        });
    }
    let nxj = pg.n_xi_nodes();
    let h = 0.5 * pg.xi_spacing();
    let mut values = Vec::with_capacity(grid.n_nodes() * nxj);
    for &r in rho.values() {
        let radius = (constants.c_tf * r.powf(2.0 / d as f64)).sqrt();
        for j in 0..nxj {
            let xi = pg.xi_coord(j);
            let occ = match d {
                1 => {
                    // Exact overlap of the cell with the Fermi interval.
                    let lo = (xi[0] - h).max(-radius);
                    let hi = (xi[0] + h).min(radius);
                    ((hi - lo) / pg.xi_spacing()).clamp(0.0, 1.0)
                }
                _ => cell_disk_fraction(xi[0], xi[1], h, radius),
            };
            values.push(occ);
        }
    }
    HusimiField::new(
        Arc::new(pg.as_ref().clone()),
        values,
        Provenance::BathtubOfRho,
    )
}

/// Fraction of the square cell centered at (x, y) with half-side h inside
/// the disk of the given radius; boundary cells are subsampled.
fn cell_disk_fraction(x: f64, y: f64, h: f64, radius: f64) -> f64 {
    let r2 = radius * radius;
    let corners_in = |cx: f64, cy: f64, ch: f64| -> (bool, bool) {
        let mut all = true;
        let mut any = false;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                let px = cx + sx * ch;
                let py = cy + sy * ch;
                if px * px + py * py <= r2 {
                    any = true;
                } else {
                    all = false;
                }
            }
        }
        (all, any)
    };
    let (all, any) = corners_in(x, y, h);
    if all {
        return 1.0;
    }
    if !any && x * x + y * y > r2 + 4.0 * h * h {
        return 0.0;
    }
    // Boundary cell: 8x8 midpoint subsampling.
    let n = 8;
    let step = 2.0 * h / n as f64;
    let mut inside = 0usize;
    for ix in 0..n {
        for iy in 0..n {
            let px = x - h + (ix as f64 + 0.5) * step;
            let py = y - h + (iy as f64 + 0.5) * step;
            if px * px + py * py <= r2 {
                inside += 1;
            }
        }
    }
    inside as f64 / (n * n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::{tf_energy, vlasov_energy};
    use crate::lattice::{build_grid, InteractionSpec, PotentialSpec};
    use crate::operators::{schrodinger, spectral_projector, ProjectorMode};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn harmonic(grid: Arc<Grid>, hbar: f64) -> ModelSpec {
        ModelSpec::new(
            grid,
            hbar,
            PotentialSpec::Harmonic { k: 1.0 },
            InteractionSpec::none(),
            1.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn window_norm_is_one() {
        let g = build_grid(1, 6.0, 601).unwrap();
        let fam = CoherentFamily::new(0.1, 1).unwrap();
        assert_abs_diff_eq!(fam.window_norm(&g), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn husimi_of_zero_and_identity() {
        let g = build_grid(1, 6.0, 241).unwrap();
        let m = harmonic(g.clone(), 0.1);
        let pg = Arc::new(PhaseGrid::for_model(&m, 65).unwrap());
        let fam = CoherentFamily::new(0.1, 1).unwrap();
        let zero = DensityMatrix::zeros(g.clone());
        let f0 = husimi_transform(&zero, &fam, &pg).unwrap();
        assert!(f0.values().iter().all(|&v| v == 0.0));

        let id = DensityMatrix::new(g.clone(), DMatrix::identity(g.n_nodes(), g.n_nodes())).unwrap();
        let f1 = husimi_transform(&id, &fam, &pg).unwrap();
        // Interior values approach <f, f> = 1.
        let nxj = pg.n_xi_nodes();
        let i_mid = g.n_nodes() / 2;
        for j in 0..nxj {
            assert!((f1.get(i_mid, j) - 1.0).abs() < 1e-6, "j={j}: {}", f1.get(i_mid, j));
        }
    }

    #[test]
    fn husimi_pauli_bound_on_projector() {
        let g = build_grid(1, 6.0, 241).unwrap();
        let m = harmonic(g.clone(), 0.1);
        let op = schrodinger(&m);
        let (p, _) = spectral_projector(&op, 0.0, ProjectorMode::Strict, op.default_zero_tol()).unwrap();
        let pg = Arc::new(PhaseGrid::for_model(&m, 97).unwrap());
        let fam = CoherentFamily::new(0.1, 1).unwrap();
        let f = husimi_transform(&p, &fam, &pg).unwrap();
        let max = f.values().iter().cloned().fold(0.0, f64::max);
        assert!(max <= 1.0 + TOL_OCC, "max occupancy {max}");
    }

    #[test]
    fn husimi_density_convolution_identity() {
        // rho_m = hbar^d rho_gamma * |f^hbar|^2 within 1e-6 relative L1.
        let g = build_grid(1, 6.0, 241).unwrap();
        let m = harmonic(g.clone(), 0.1);
        let op = schrodinger(&m);
        let (p, _) = spectral_projector(&op, 0.0, ProjectorMode::Strict, op.default_zero_tol()).unwrap();
        let pg = Arc::new(PhaseGrid::for_model(&m, 257).unwrap());
        let fam = CoherentFamily::new(0.1, 1).unwrap();
        let f = husimi_transform(&p, &fam, &pg).unwrap();
        let rho_m = f.spatial_density();

        let rho_g = p.density();
        let conv: Vec<f64> = (0..g.n_nodes())
            .map(|i| {
                let xi = g.axis()[i];
                let mut acc = 0.0;
                for k in 0..g.n_nodes() {
                    let dy = xi - g.axis()[k];
                    acc += rho_g.values()[k] * fam.window_squared(dy * dy);
                }
                m.hbar * acc * g.weight()
            })
            .collect();
        let num: f64 = rho_m
            .values()
            .iter()
            .zip(&conv)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        let den: f64 = conv.iter().sum::<f64>();
        assert!(num / den < 1e-6, "relative L1 {}", num / den);
    }

    #[test]
    fn husimi_affine_in_gamma() {
        let g = build_grid(1, 3.0, 61).unwrap();
        let fam = CoherentFamily::new(0.2, 1).unwrap();
        let m = harmonic(g.clone(), 0.2);
        let pg = Arc::new(PhaseGrid::for_model(&m, 33).unwrap());
        let a = crate::testing::random_admissible(&g, 41);
        let b = crate::testing::random_admissible(&g, 42);
        let alpha = 0.3;
        let mixed = a.mix(&b, 1.0 - alpha);
        let fa = husimi_transform(&a, &fam, &pg).unwrap();
        let fb = husimi_transform(&b, &fam, &pg).unwrap();
        let fm = husimi_transform(&mixed, &fam, &pg).unwrap();
        for k in (0..fm.values().len()).step_by(97) {
            let expect = alpha * fa.values()[k] + (1.0 - alpha) * fb.values()[k];
            assert_abs_diff_eq!(fm.values()[k], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn husimi_trace_identity() {
        let g = build_grid(1, 6.0, 241).unwrap();
        let m = harmonic(g.clone(), 0.1);
        let op = schrodinger(&m);
        let (p, _) = spectral_projector(&op, 0.0, ProjectorMode::Strict, op.default_zero_tol()).unwrap();
        let pg = Arc::new(PhaseGrid::for_model(&m, 257).unwrap());
        let fam = CoherentFamily::new(0.1, 1).unwrap();
        let f = husimi_transform(&p, &fam, &pg).unwrap();
        let mass = f.phase_space_mass();
        let expected = m.hbar * p.trace();
        assert!(
            (mass - expected).abs() / expected <= 1e-4,
            "mass {mass} vs hbar tr {expected}"
        );
    }

    #[test]
    fn kinetic_identity_on_projector() {
        // The trace side uses the 3-point Laplacian, whose dispersion error
        // relative to the |xi|^2 moment is ~(dx/hbar)^2/12; dx = 0.1 hbar
        // keeps it under the 1e-3 tolerance. Xi = 3 covers the momentum tail
        // of coherent states at the Fermi surface.
        let g = build_grid(1, 6.0, 481).unwrap();
        let m = harmonic(g.clone(), 0.25);
        let op = schrodinger(&m);
        let (p, _) = spectral_projector(&op, 0.0, ProjectorMode::Strict, op.default_zero_tol()).unwrap();
        let pg = Arc::new(PhaseGrid::new(g.clone(), 3.0, 193).unwrap());
        let fam = CoherentFamily::new(0.25, 1).unwrap();
        let rep = kinetic_identity_check(&p, &fam, &pg, &m).unwrap();
        assert!(rep.kinetic_residual < 1e-3, "{rep:?}");
        assert!(rep.potential_residual < 1e-3, "{rep:?}");
        // Gaussian window correction constant in d = 1.
        assert_abs_diff_eq!(fam.grad_norm_sq(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn kinetic_identity_zero_state() {
        let g = build_grid(1, 4.0, 81).unwrap();
        let m = harmonic(g.clone(), 0.2);
        let pg = Arc::new(PhaseGrid::for_model(&m, 33).unwrap());
        let fam = CoherentFamily::new(0.2, 1).unwrap();
        let rep = kinetic_identity_check(&DensityMatrix::zeros(g), &fam, &pg, &m).unwrap();
        assert_eq!(rep.kinetic_lhs, 0.0);
        assert_eq!(rep.kinetic_rhs, 0.0);
    }

    #[test]
    fn bathtub_reproduces_density() {
        let g = build_grid(1, 6.0, 301).unwrap();
        let m = harmonic(g.clone(), 0.1);
        let rho = Density::from_fn(g.clone(), |x| {
            (1.0 - x[0] * x[0]).max(0.0).sqrt() / std::f64::consts::PI
        })
        .unwrap();
        let pg = Arc::new(PhaseGrid::for_model(&m, 257).unwrap());
        let consts = TfConstants::for_dim(1);
        let f = bathtub_lift(&rho, &consts, &pg).unwrap();
        let rho_m = f.spatial_density();
        for i in 0..g.n_nodes() {
            assert_abs_diff_eq!(rho_m.values()[i], rho.values()[i], epsilon = 1e-12);
        }
        // Fermi radius at a constant-density node equals pi rho (d = 1).
        let i0 = g.nearest_node(&[0.0]);
        let radius = std::f64::consts::PI * rho.values()[i0];
        let nxj = pg.n_xi_nodes();
        for j in 0..nxj {
            let xi = pg.xi_coord(j)[0];
            if xi.abs() < radius - pg.xi_spacing() {
                assert_abs_diff_eq!(f.get(i0, j), 1.0, epsilon = 1e-12);
            }
            if xi.abs() > radius + pg.xi_spacing() {
                assert_abs_diff_eq!(f.get(i0, j), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bathtub_energy_identity() {
        let g = build_grid(1, 6.0, 401).unwrap();
        let mut m = harmonic(g.clone(), 0.1);
        m.interaction = InteractionSpec::gaussian(1.0, 1.0);
        m.lambda = 1.0;
        let rho = Density::from_fn(g.clone(), |x| {
            0.8 * (1.0 - 0.5 * x[0] * x[0]).max(0.0) / std::f64::consts::PI
        })
        .unwrap();
        let pg = Arc::new(PhaseGrid::for_model(&m, 513).unwrap());
        let consts = TfConstants::for_dim(1);
        let f = bathtub_lift(&rho, &consts, &pg).unwrap();
        let ev = vlasov_energy(&m, &f).unwrap().total;
        let et = tf_energy(&m, &rho).unwrap().total;
        assert!(
            (ev - et).abs() / et.abs() < 1e-4,
            "vlasov {ev} vs tf {et}"
        );
    }

    #[test]
    fn bathtub_rejects_small_momentum_grid() {
        let g = build_grid(1, 2.0, 41).unwrap();
        let rho = Density::from_fn(g.clone(), |_| 5.0).unwrap();
        let pg = Arc::new(PhaseGrid::new(g, 1.0, 33).unwrap());
        let consts = TfConstants::for_dim(1);
        assert!(matches!(
            bathtub_lift(&rho, &consts, &pg),
            Err(Error::MomentumGridTooSmall { .. })
        ));
    }

    #[test]
    fn bathtub_is_optimal_under_rearrangement() {
        // Moving occupation from inside the Fermi ball to outside at fixed
        // spatial density can only raise the Vlasov energy.
        let g = build_grid(1, 4.0, 101).unwrap();
        let m = harmonic(g.clone(), 0.1);
        let rho = Density::from_fn(g.clone(), |x| {
            0.25 * (1.0 - 0.3 * x[0] * x[0]).max(0.0)
        })
        .unwrap();
        let pg = Arc::new(PhaseGrid::for_model(&m, 129).unwrap());
        let consts = TfConstants::for_dim(1);
        let base = bathtub_lift(&rho, &consts, &pg).unwrap();
        let e0 = vlasov_energy(&m, &base).unwrap().total;
        let nxj = pg.n_xi_nodes();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let mut vals = base.values().to_vec();
            // Random spatial node; swap a filled low-|xi| cell with an empty
            // high-|xi| cell.
            let i = rng.gen_range(0..g.n_nodes());
            let row = i * nxj;
            let filled: Vec<usize> = (0..nxj).filter(|&j| vals[row + j] >= 0.999).collect();
            let empty: Vec<usize> = (0..nxj).filter(|&j| vals[row + j] <= 0.001).collect();
            if filled.is_empty() || empty.is_empty() {
                continue;
            }
            let a = filled[rng.gen_range(0..filled.len())];
            let b = empty[rng.gen_range(0..empty.len())];
            vals.swap(row + a, row + b);
            let perturbed = HusimiField::new(
                Arc::new(pg.as_ref().clone()),
                vals,
                Provenance::Explicit,
            )
            .unwrap();
            let e1 = vlasov_energy(&m, &perturbed).unwrap().total;
            assert!(e1 >= e0 - 1e-9, "rearrangement lowered energy: {e1} < {e0}");
        }
    }
}
