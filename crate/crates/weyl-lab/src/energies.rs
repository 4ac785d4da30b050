//! Every energy functional of the model under one unit convention: direct
//! and exchange terms, (reduced) Hartree-Fock with the lambda coupling,
//! Thomas-Fermi and Vlasov.
//!
//! All quadrature uses the grid weight dx^dim node-wise, so the algebraic
//! identities between the functionals (quadratic expansion, rank-one
//! exchange identity, bathtub equality) hold exactly at the discrete level.

use crate::lattice::{convolve_with_table, Density, KernelTable, ModelSpec};
use crate::operators::{kinetic_matrix, DensityMatrix};
use crate::phase_space::HusimiField;
use crate::{Error, Result};
use serde::Serialize;

/// Term-by-term energy account; total = kinetic + potential + direct - exchange.
#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    /// Includes the -E * mass chemical-potential term.
    pub potential: f64,
    pub direct: f64,
    pub exchange: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn close(kinetic: f64, potential: f64, direct: f64, exchange: f64) -> Self {
        EnergyBreakdown {
            kinetic,
            potential,
            direct,
            exchange,
            total: kinetic + potential + direct - exchange,
        }
    }
}

/// Thomas-Fermi constants for the working dimension.
#[derive(Debug, Clone, Copy)]
pub struct TfConstants {
    pub dim: usize,
    /// 4 pi^2 / |B(0,1)|^{2/d}: pi^2 for d = 1, 4 pi for d = 2.
    pub c_tf: f64,
    /// Unit-ball volume: 2 for d = 1, pi for d = 2.
    pub unit_ball_volume: f64,
}

impl TfConstants {
    pub fn for_dim(dim: usize) -> Self {
        let unit_ball_volume = match dim {
            1 => 2.0,
            _ => std::f64::consts::PI,
        };
        let c_tf = 4.0 * std::f64::consts::PI * std::f64::consts::PI
            / unit_ball_volume.powf(2.0 / dim as f64);
        TfConstants {
            dim,
            c_tf,
            unit_ball_volume,
        }
    }
}

/// D_w(rho_a, rho_b) = sum_ij rho_a(i) rho_b(j) w(x_i - x_j) dx^{2 dim}.
pub fn direct_term(rho_a: &Density, rho_b: &Density, m: &ModelSpec) -> Result<f64> {
    if rho_a.grid().n_nodes() != m.grid.n_nodes() || rho_b.grid().n_nodes() != m.grid.n_nodes() {
        return Err(Error::GridMismatch("direct_term density grids differ".into()));
    }
    let table = m.kernel_table();
    Ok(direct_term_with_table(
        rho_a.values(),
        rho_b.values(),
        &table,
        m,
    ))
}

pub(crate) fn direct_term_with_table(
    rho_a: &[f64],
    rho_b: &[f64],
    table: &KernelTable,
    m: &ModelSpec,
) -> f64 {
    let conv = convolve_with_table(rho_b, table, &m.grid);
    rho_a
        .iter()
        .zip(&conv)
        .map(|(a, c)| a * c)
        .sum::<f64>()
        * m.grid.weight()
}

/// Ex_w(gamma) = sum_ij Gamma_ij^2 w(x_i - x_j).
///
/// The kernel-squared quadrature |gamma(x,y)|^2 dx^{2d} collapses to
/// Gamma_ij^2 under the node-basis convention.
pub fn exchange_term(gamma: &DensityMatrix, m: &ModelSpec) -> Result<f64> {
    if gamma.grid().n_nodes() != m.grid.n_nodes() {
        return Err(Error::GridMismatch("exchange_term grid differs".into()));
    }
    let table = m.kernel_table();
    Ok(exchange_term_with_table(gamma, &table))
}

pub(crate) fn exchange_term_with_table(gamma: &DensityMatrix, table: &KernelTable) -> f64 {
    let g = gamma.matrix();
    let n = g.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = g[(i, j)];
            acc += v * v * table.get(i, j);
        }
    }
    acc
}

/// The hbar-Hartree-Fock energy
/// hbar^d tr((-hbar^2 Lap + V - E) gamma)
/// + lambda hbar^{2d}/2 (D_w(rho, rho) - Ex_w(gamma)),
/// with the exchange term dropped when `include_exchange` is false (rHF).
pub fn hf_energy(
    m: &ModelSpec,
    gamma: &DensityMatrix,
    include_exchange: bool,
) -> Result<EnergyBreakdown> {
    if gamma.grid().n_nodes() != m.grid.n_nodes() {
        return Err(Error::GridMismatch("hf_energy grid differs".into()));
    }
    let hbar_d = m.hbar_d();
    let kin_op = kinetic_matrix(&m.grid, m.hbar);
    let kinetic = hbar_d * kin_op.trace_against(gamma);
    let shifted = m.shifted_potential();
    let potential = hbar_d
        * (0..m.grid.n_nodes())
            .map(|i| shifted[i] * gamma.matrix()[(i, i)])
            .sum::<f64>();
    let (direct, exchange) = if m.lambda == 0.0 || m.interaction.is_zero() {
        (0.0, 0.0)
    } else {
        let table = m.kernel_table();
        let rho = gamma.density();
        let half = 0.5 * m.lambda * hbar_d * hbar_d;
        let d = half * direct_term_with_table(rho.values(), rho.values(), &table, m);
        let x = if include_exchange {
            half * exchange_term_with_table(gamma, &table)
        } else {
            0.0
        };
        (d, x)
    };
    Ok(EnergyBreakdown::close(kinetic, potential, direct, exchange))
}

/// The Thomas-Fermi energy
/// (d/(d+2)) c_TF int rho^{1+2/d} + int (V - E) rho + lambda/2 D_w(rho, rho).
pub fn tf_energy(m: &ModelSpec, rho: &Density) -> Result<EnergyBreakdown> {
    if rho.grid().n_nodes() != m.grid.n_nodes() {
        return Err(Error::GridMismatch("tf_energy grid differs".into()));
    }
    let d = m.dim() as f64;
    let consts = TfConstants::for_dim(m.dim());
    let weight = m.grid.weight();
    let p = 1.0 + 2.0 / d;
    let kinetic = d / (d + 2.0)
        * consts.c_tf
        * rho.values().iter().map(|&r| r.powf(p)).sum::<f64>()
        * weight;
    let shifted = m.shifted_potential();
    let potential = rho
        .values()
        .iter()
        .zip(&shifted)
        .map(|(r, v)| r * v)
        .sum::<f64>()
        * weight;
    let direct = if m.lambda == 0.0 || m.interaction.is_zero() {
        0.0
    } else {
        let table = m.kernel_table();
        0.5 * m.lambda * direct_term_with_table(rho.values(), rho.values(), &table, m)
    };
    Ok(EnergyBreakdown::close(kinetic, potential, direct, 0.0))
}

/// The Vlasov energy of a phase-space occupation:
/// (2 pi)^{-d} iint |xi|^2 m + int (V - E) rho_m + lambda/2 D_w(rho_m, rho_m).
pub fn vlasov_energy(m: &ModelSpec, field: &HusimiField) -> Result<EnergyBreakdown> {
    field.check_occupancy()?;
    let kinetic = field.kinetic_moment();
    let rho = field.spatial_density();
    let shifted = m.shifted_potential();
    let potential = rho
        .values()
        .iter()
        .zip(&shifted)
        .map(|(r, v)| r * v)
        .sum::<f64>()
        * m.grid.weight();
    let direct = if m.lambda == 0.0 || m.interaction.is_zero() {
        0.0
    } else {
        let table = m.kernel_table();
        0.5 * m.lambda * direct_term_with_table(rho.values(), rho.values(), &table, m)
    };
    Ok(EnergyBreakdown::close(kinetic, potential, direct, 0.0))
}

/// Outcome of the coercivity regression guard
/// E^HF(gamma) >= (hbar^d / 4) tr((-hbar^2 Lap + V + 1) gamma) - C.
#[derive(Debug, Clone, Serialize)]
pub struct CoercivityDiagnostic {
    pub hf_total: f64,
    pub lower_bound: f64,
    pub holds: bool,
    pub margin: f64,
}

/// hbar^d tr((-hbar^2 Lap + V + 1) gamma); the trace-bound quantity of the
/// almost-minimizer lemma, also used by the sweep harness.
pub fn weighted_trace(m: &ModelSpec, gamma: &DensityMatrix) -> f64 {
    let kin_op = kinetic_matrix(&m.grid, m.hbar);
    let kin = kin_op.trace_against(gamma);
    let grid = &m.grid;
    let pot: f64 = (0..grid.n_nodes())
        .map(|i| {
            let c = grid.coord(i);
            (m.potential.eval(&c[..grid.dim()]) + 1.0) * gamma.matrix()[(i, i)]
        })
        .sum();
    m.hbar_d() * (kin + pot)
}

/// Checks the coercivity lower bound with a model-calibrated constant; a
/// regression guard, not a proof (the lemma's constant is non-constructive).
pub fn coercivity_check(
    m: &ModelSpec,
    gamma: &DensityMatrix,
    c_cfg: f64,
) -> Result<CoercivityDiagnostic> {
    let hf_total = hf_energy(m, gamma, true)?.total;
    let lower_bound = 0.25 * weighted_trace(m, gamma) - c_cfg;
    Ok(CoercivityDiagnostic {
        hf_total,
        lower_bound,
        holds: hf_total >= lower_bound,
        margin: hf_total - lower_bound,
    })
}

/// Calibrates the coercivity constant over a family of probe states:
/// C = max(0, sup_gamma [quarter-trace - E^HF]) with 10% headroom.
pub fn calibrate_coercivity<'a>(
    m: &ModelSpec,
    probes: impl IntoIterator<Item = &'a DensityMatrix>,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for gamma in probes {
        let hf = hf_energy(m, gamma, true)?.total;
        let gap = 0.25 * weighted_trace(m, gamma) - hf;
        worst = worst.max(gap);
    }
    Ok(worst * 1.1)
}
