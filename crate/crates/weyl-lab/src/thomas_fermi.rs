//! Thomas-Fermi solvers: the self-consistent fixed point of the TF integral
//! equation and direct projected-gradient minimization of the TF energy.
//!
//! The two methods are deliberately independent; their agreement is the
//! internal oracle that anchors interacting reference values elsewhere in
//! the crate.

use crate::energies::{tf_energy, TfConstants};
use crate::lattice::{convolve_with_table, Density, KernelTable, ModelSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum TfMethod {
    FixedPoint,
    ProjectedGradient,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TfSolveReport {
    pub method: TfMethod,
    pub iterations: usize,
    /// ||rho - Phi(rho)||_1 at the final iterate.
    pub residual: f64,
    pub mass: f64,
    pub energy: f64,
    pub converged: bool,
}

/// Damped fixed-point configuration.
#[derive(Debug, Clone)]
pub struct TfFixedPointConfig {
    /// Initial mixing weight on Phi(rho); halved whenever the map residual
    /// increases (the TF map need not be a contraction at strong coupling).
    pub beta: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for TfFixedPointConfig {
    fn default() -> Self {
        TfFixedPointConfig {
            beta: 0.5,
            tol: 1e-10,
            max_iters: 2000,
        }
    }
}

/// Projected-gradient configuration.
#[derive(Debug, Clone)]
pub struct TfMinimizeConfig {
    /// Initial step; adapted by backtracking.
    pub step: f64,
    /// Stop when the L1 norm of the gradient map falls below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for TfMinimizeConfig {
    fn default() -> Self {
        TfMinimizeConfig {
            step: 0.5,
            tol: 1e-9,
            max_iters: 20000,
        }
    }
}

fn effective_kernel(m: &ModelSpec) -> Option<KernelTable> {
    if m.lambda == 0.0 || m.interaction.is_zero() {
        None
    } else {
        Some(m.kernel_table())
    }
}

fn mean_field_shift(m: &ModelSpec, rho: &[f64], table: Option<&KernelTable>) -> Vec<f64> {
    match table {
        Some(t) => convolve_with_table(rho, t, &m.grid)
            .into_iter()
            .map(|v| m.lambda * v)
            .collect(),
        None => vec![0.0; m.grid.n_nodes()],
    }
}

fn tf_map_values(m: &ModelSpec, rho: &[f64], table: Option<&KernelTable>) -> Vec<f64> {
    let d = m.grid.dim();
    let consts = TfConstants::for_dim(d);
    // |B(0,1)| / (2 pi)^d = c_TF^{-d/2}.
    let prefactor = consts.c_tf.powf(-(d as f64) / 2.0);
    let shifted = m.shifted_potential();
    let shift = mean_field_shift(m, rho, table);
    (0..m.grid.n_nodes())
        .map(|i| {
            let gap = -(shifted[i] + shift[i]); // E - V - lambda w*rho
            prefactor * gap.max(0.0).powf(d as f64 / 2.0)
        })
        .collect()
}

/// One application of the TF map
/// Phi(rho)(x) = (|B|/(2 pi)^d) (E - V - lambda w*rho)_+^{d/2}.
pub fn tf_map(m: &ModelSpec, rho: &Density) -> Result<Density> {
    if rho.grid().n_nodes() != m.grid.n_nodes() {
        return Err(Error::GridMismatch("tf_map grid differs".into()));
    }
    let table = effective_kernel(m);
    Density::new(m.grid.clone(), tf_map_values(m, rho.values(), table.as_ref()))
}

fn l1(grid_weight: f64, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * grid_weight
}

/// Damped fixed-point iteration from rho_0 = Phi(0).
pub fn tf_fixed_point(
    m: &ModelSpec,
    cfg: &TfFixedPointConfig,
) -> Result<(Density, TfSolveReport)> {
    if !(cfg.beta > 0.0 && cfg.beta <= 1.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument("need beta in (0, 1] and tol > 0".into()));
    }
    let table = effective_kernel(m);
    let w = m.grid.weight();
    let zero = vec![0.0; m.grid.n_nodes()];
    let mut rho = tf_map_values(m, &zero, table.as_ref());
    let mut beta = cfg.beta;
    let mut last_residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for k in 0..cfg.max_iters {
        iterations = k + 1;
        let mapped = tf_map_values(m, &rho, table.as_ref());
        let residual = l1(w, &mapped, &rho);
        if residual > last_residual {
            beta = (beta * 0.5).max(1e-6);
        }
        last_residual = residual;
        let norm: f64 = rho.iter().sum::<f64>() * w;
        let mut change = 0.0;
        for (r, &phi) in rho.iter_mut().zip(&mapped) {
            let next = (1.0 - beta) * *r + beta * phi;
            change += (next - *r).abs();
            *r = next;
        }
        change *= w;
        if change < cfg.tol * norm.max(1.0) {
            converged = true;
            break;
        }
    }

    let mapped = tf_map_values(m, &rho, table.as_ref());
    let residual = l1(w, &mapped, &rho);
    let density = Density::new(m.grid.clone(), rho)?;
    let energy = tf_energy(m, &density)?.total;
    Ok((
        density.clone(),
        TfSolveReport {
            method: TfMethod::FixedPoint,
            iterations,
            residual,
            mass: density.mass(),
            energy,
            converged,
        },
    ))
}

/// Gradient of the TF energy: c_TF rho^{2/d} + V - E + lambda (w * rho).
fn tf_gradient(m: &ModelSpec, rho: &[f64], table: Option<&KernelTable>) -> Vec<f64> {
    let d = m.grid.dim();
    let consts = TfConstants::for_dim(d);
    let shifted = m.shifted_potential();
    let shift = mean_field_shift(m, rho, table);
    (0..m.grid.n_nodes())
        .map(|i| consts.c_tf * rho[i].powf(2.0 / d as f64) + shifted[i] + shift[i])
        .collect()
}

fn tf_energy_values(m: &ModelSpec, rho: &[f64], table: Option<&KernelTable>) -> f64 {
    let d = m.grid.dim() as f64;
    let consts = TfConstants::for_dim(m.grid.dim());
    let w = m.grid.weight();
    let shifted = m.shifted_potential();
    let kin: f64 = rho.iter().map(|&r| r.powf(1.0 + 2.0 / d)).sum::<f64>()
        * (d / (d + 2.0))
        * consts.c_tf
        * w;
    let pot: f64 = rho.iter().zip(&shifted).map(|(r, v)| r * v).sum::<f64>() * w;
    let dir = match table {
        Some(t) => {
            let conv = convolve_with_table(rho, t, &m.grid);
            0.5 * m.lambda * rho.iter().zip(&conv).map(|(a, c)| a * c).sum::<f64>() * w
        }
        None => 0.0,
    };
    kin + pot + dir
}

/// Projected gradient descent on the TF energy over {rho >= 0} with
/// Armijo backtracking on the step.
pub fn tf_minimize(m: &ModelSpec, cfg: &TfMinimizeConfig) -> Result<(Density, TfSolveReport)> {
    if !(cfg.step > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument("need positive step and tol".into()));
    }
    let table = effective_kernel(m);
    let w = m.grid.weight();
    // Start from the non-interacting TF profile.
    let zero = vec![0.0; m.grid.n_nodes()];
    let mut rho = tf_map_values(m, &zero, table.as_ref());
    let mut energy = tf_energy_values(m, &rho, table.as_ref());
    let mut step = cfg.step;
    let mut converged = false;
    let mut iterations = 0;

    for k in 0..cfg.max_iters {
        iterations = k + 1;
        let grad = tf_gradient(m, &rho, table.as_ref());
        // Backtrack until the projected step decreases the energy enough.
        let mut accepted = None;
        for _ in 0..60 {
            let candidate: Vec<f64> = rho
                .iter()
                .zip(&grad)
                .map(|(r, g)| (r - step * g).max(0.0))
                .collect();
            let diff2: f64 = candidate
                .iter()
                .zip(&rho)
                .map(|(c, r)| (c - r) * (c - r))
                .sum::<f64>()
                * w;
            let e_new = tf_energy_values(m, &candidate, table.as_ref());
            if e_new <= energy - 1e-4 * diff2 / step {
                accepted = Some((candidate, e_new));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, e_new)) = accepted else {
            break; // step underflow: no further progress possible
        };
        let gradient_map_norm = l1(w, &candidate, &rho) / step;
        rho = candidate;
        energy = e_new;
        step = (step * 1.25).min(10.0 * cfg.step);
        if gradient_map_norm < cfg.tol {
            converged = true;
            break;
        }
    }

    let mapped = tf_map_values(m, &rho, table.as_ref());
    let residual = l1(w, &mapped, &rho);
    let density = Density::new(m.grid.clone(), rho)?;
    Ok((
        density.clone(),
        TfSolveReport {
            method: TfMethod::ProjectedGradient,
            iterations,
            residual,
            mass: density.mass(),
            energy,
            converged,
        },
    ))
}

/// Max KKT violation |c_TF rho^{2/d} - (E - V - lambda w*rho)| over the
/// bulk {rho > threshold}.
pub fn kkt_residual(m: &ModelSpec, rho: &Density, threshold: f64) -> f64 {
    let table = effective_kernel(m);
    let grad = tf_gradient(m, rho.values(), table.as_ref());
    rho.values()
        .iter()
        .zip(&grad)
        .filter(|(r, _)| **r > threshold)
        .map(|(_, g)| g.abs())
        .fold(0.0, f64::max)
}

/// Largest density value outside the classically allowed region
/// {V < E + lambda ||w * rho||_inf}; zero for a proper TF solution.
pub fn support_violation(m: &ModelSpec, rho: &Density) -> f64 {
    let table = effective_kernel(m);
    let shift = mean_field_shift(m, rho.values(), table.as_ref());
    let bound = shift.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let shifted = m.shifted_potential(); // V - E
    rho.values()
        .iter()
        .zip(&shifted)
        .filter(|(_, v)| **v >= bound)
        .map(|(r, _)| *r)
        .fold(0.0, f64::max)
}

/// Agreement metrics between the two solvers on the same model.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TfCrossReport {
    pub fixed_point: TfSolveReport,
    pub gradient: TfSolveReport,
    pub l1_distance: f64,
    pub energy_gap: f64,
}

pub fn tf_cross_validate(m: &ModelSpec) -> Result<(Density, TfCrossReport)> {
    let (rho_fp, rep_fp) = tf_fixed_point(m, &TfFixedPointConfig::default())?;
    let (rho_pg, rep_pg) = tf_minimize(m, &TfMinimizeConfig::default())?;
    let l1_distance = rho_fp.l1_distance(&rho_pg);
    let energy_gap = (rep_fp.energy - rep_pg.energy).abs();
    Ok((
        rho_fp,
        TfCrossReport {
            fixed_point: rep_fp,
            gradient: rep_pg,
            l1_distance,
            energy_gap,
        },
    ))
}

/// Two-column text (coordinate, value), one node per row; 2D grids emit
/// (x, y, value) triples.
pub fn density_text(rho: &Density) -> String {
    let grid = rho.grid();
    let mut s = String::new();
    for i in 0..grid.n_nodes() {
        let c = grid.coord(i);
        if grid.dim() == 1 {
            s.push_str(&format!("{:.12e} {:.12e}\n", c[0], rho.values()[i]));
        } else {
            s.push_str(&format!(
                "{:.12e} {:.12e} {:.12e}\n",
                c[0], c[1], rho.values()[i]
            ));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_grid, Grid, InteractionKind, InteractionSpec, PotentialSpec, RepulsivityMode};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn harmonic(grid: Arc<Grid>, w: InteractionSpec, lambda: f64) -> ModelSpec {
        ModelSpec::new(grid, 0.1, PotentialSpec::Harmonic { k: 1.0 }, w, 1.0, lambda).unwrap()
    }

    #[test]
    fn map_matches_harmonic_closed_form() {
        let g = build_grid(1, 2.0, 401).unwrap();
        let m = harmonic(g.clone(), InteractionSpec::none(), 0.0);
        let any = crate::testing::random_density(&g, 3);
        let phi = tf_map(&m, &any).unwrap();
        for i in 0..g.n_nodes() {
            let x = g.axis()[i];
            let expect = (1.0 - x * x).max(0.0).sqrt() / std::f64::consts::PI;
            assert_abs_diff_eq!(phi.values()[i], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn map_vanishes_below_the_well() {
        let g = build_grid(1, 2.0, 41).unwrap();
        // E = -1 < min V = 0: positive part is empty.
        let m = ModelSpec::new(
            g.clone(),
            0.1,
            PotentialSpec::Harmonic { k: 1.0 },
            InteractionSpec::none(),
            -1.0,
            0.0,
        )
        .unwrap();
        let any = crate::testing::random_density(&g, 4);
        let phi = tf_map(&m, &any).unwrap();
        assert!(phi.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_kernel_scalar_self_consistency() {
        // w = 2, E = 1, V = x^2: N = 1/4 and rho(0) = sqrt(1/2)/pi.
        let g = build_grid(1, 2.0, 2001).unwrap();
        let w = InteractionSpec {
            kind: InteractionKind::Constant { c: 2.0 },
            repulsivity_mode: RepulsivityMode::FourierNonneg,
        };
        let m = harmonic(g.clone(), w, 1.0);
        let (rho, rep) = tf_fixed_point(&m, &TfFixedPointConfig::default()).unwrap();
        assert!(rep.converged);
        assert_abs_diff_eq!(rep.mass, 0.25, epsilon = 1e-4);
        let i0 = g.nearest_node(&[0.0]);
        assert_abs_diff_eq!(
            rho.values()[i0],
            (0.5f64).sqrt() / std::f64::consts::PI,
            epsilon = 1e-6
        );
    }

    #[test]
    fn free_fixed_point_one_iteration() {
        let g = build_grid(1, 2.0, 2001).unwrap();
        let m = harmonic(g, InteractionSpec::none(), 0.0);
        let (rho, rep) = tf_fixed_point(&m, &TfFixedPointConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 3, "iterations {}", rep.iterations);
        assert_abs_diff_eq!(rep.mass, 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(rep.energy, -0.25, epsilon = 1e-4);
        assert_eq!(support_violation(&m, &rho), 0.0);
    }

    #[test]
    fn gaussian_fixed_point_residual() {
        let g = build_grid(1, 6.0, 601).unwrap();
        let m = harmonic(g, InteractionSpec::gaussian(1.0, 1.0), 1.0);
        let (rho, rep) = tf_fixed_point(&m, &TfFixedPointConfig::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.residual < 1e-8, "residual {}", rep.residual);
        assert_eq!(support_violation(&m, &rho), 0.0);
    }

    #[test]
    fn minimize_free_harmonic() {
        let g = build_grid(1, 2.0, 2001).unwrap();
        let m = harmonic(g, InteractionSpec::none(), 0.0);
        let (rho, rep) = tf_minimize(&m, &TfMinimizeConfig::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert_abs_diff_eq!(rep.energy, -0.25, epsilon = 1e-4);
        // Pointwise agreement with the closed form away from the free
        // boundary, where the square root is steep.
        for i in 0..rho.grid().n_nodes() {
            let x = rho.grid().axis()[i];
            if x.abs() < 0.9 {
                let expect = (1.0 - x * x).sqrt() / std::f64::consts::PI;
                assert_abs_diff_eq!(rho.values()[i], expect, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn minimize_satisfies_kkt() {
        let g = build_grid(1, 6.0, 601).unwrap();
        let m = harmonic(g, InteractionSpec::gaussian(1.0, 1.0), 1.0);
        let (rho, rep) = tf_minimize(&m, &TfMinimizeConfig::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        // KKT violation over the bulk; threshold keeps clear of the kink.
        let kkt = kkt_residual(&m, &rho, 1e-3);
        assert!(kkt < 1e-5, "kkt {kkt}");
    }

    #[test]
    fn solvers_cross_validate() {
        let g = build_grid(1, 6.0, 601).unwrap();
        let m = harmonic(g, InteractionSpec::gaussian(1.0, 1.0), 1.0);
        let (_, cross) = tf_cross_validate(&m).unwrap();
        assert!(cross.fixed_point.converged && cross.gradient.converged);
        assert!(cross.l1_distance < 1e-5, "l1 {}", cross.l1_distance);
        assert!(cross.energy_gap < 1e-6, "energy gap {}", cross.energy_gap);
    }

    #[test]
    fn fixed_points_are_kkt_points() {
        let g = build_grid(1, 6.0, 601).unwrap();
        let m = harmonic(g, InteractionSpec::gaussian(0.8, 1.2), 1.0);
        let (rho_fp, rep) = tf_fixed_point(&m, &TfFixedPointConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(kkt_residual(&m, &rho_fp, 1e-3) < 1e-6);
        // And conversely the PG minimizer is a fixed point of the map.
        let (rho_pg, rep_pg) = tf_minimize(&m, &TfMinimizeConfig::default()).unwrap();
        assert!(rep_pg.converged);
        let mapped = tf_map(&m, &rho_pg).unwrap();
        assert!(rho_pg.l1_distance(&mapped) < 1e-6);
    }

    #[test]
    fn energy_bounded_below_along_iterates() {
        // For a PSD kernel the fixed-point iterates never dip below the
        // converged energy by more than tolerance.
        let g = build_grid(1, 6.0, 301).unwrap();
        let m = harmonic(g.clone(), InteractionSpec::gaussian(1.0, 1.0), 1.0);
        let (_, rep) = tf_fixed_point(&m, &TfFixedPointConfig::default()).unwrap();
        let table = effective_kernel(&m);
        let zero = vec![0.0; g.n_nodes()];
        let mut rho = tf_map_values(&m, &zero, table.as_ref());
        for _ in 0..50 {
            let e = tf_energy_values(&m, &rho, table.as_ref());
            assert!(e >= rep.energy - 1e-9, "iterate energy {e} below {}", rep.energy);
            let mapped = tf_map_values(&m, &rho, table.as_ref());
            for (r, phi) in rho.iter_mut().zip(&mapped) {
                *r = 0.5 * *r + 0.5 * phi;
            }
        }
    }

    #[test]
    fn density_text_round_shape() {
        let g = build_grid(1, 1.0, 5).unwrap();
        let rho = crate::testing::random_density(&g, 9);
        let text = density_text(&rho);
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 2);
    }
}
