//! Experiment harness: hbar-sweeps comparing Hartree-Fock / reduced
//! Hartree-Fock states against the Thomas-Fermi targets, pointwise Weyl
//! tables, and the heat-kernel Tauberian check.
//!
//! Output formats are deliberately boring: CSV with a fixed, documented
//! column order, a versioned JSON summary, and minimal SVG polyline plots.

use crate::energies::weighted_trace;
use crate::lattice::{
    build_grid, validate_model, Density, Grid, InteractionSpec, ModelSpec, PotentialSpec,
    ValidationConfig,
};
use crate::operators::{kinetic_matrix, DensityMatrix, OperatorMatrix, SpectralData};
use crate::scf::{scf_solve, ScfConfig};
use crate::thomas_fermi::{tf_cross_validate, TfCrossReport};
use crate::{Error, Result};
use std::sync::Arc;

/// JSON summary schema version; bump on any breaking field change.
pub const SCHEMA_VERSION: u32 = 1;

/// Fixed CSV column order for sweep records. Probe columns
/// `probe_<k>` (hbar^d rho at the k-th probe, reduced HF state) follow.
pub const CSV_COLUMNS: &[&str] = &[
    "hbar",
    "n_nodes",
    "e_hf",
    "e_rhf",
    "scaled_trace_hf",
    "scaled_trace_rhf",
    "weighted_trace_rhf",
    "exchange_abs",
    "exchange_ratio",
    "residual_hf",
    "residual_rhf",
    "degeneracy_rhf",
    "converged_hf",
    "converged_rhf",
    "n_nodes_fine",
    "e_rhf_extrapolated",
];

/// Grid resolution for a given hbar: dx small enough both for the
/// oscillation rule sqrt(hbar) >= 4 dx and for the Fermi wavelength
/// (dx <= hbar/2, which keeps the finite-difference dispersion error at the
/// Fermi momentum near 1%). Returns an odd count so x = 0 is a node.
pub fn nodes_for(hbar: f64, half_width: f64) -> usize {
    let dx = (hbar.sqrt() / 4.0).min(0.49 * hbar);
    let half = (half_width / dx).ceil() as usize;
    2 * half + 1
}

/// Everything about a model except the grid and hbar.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelTemplate {
    pub dim: usize,
    pub half_width: f64,
    pub potential: PotentialSpec,
    pub interaction: InteractionSpec,
    pub energy: f64,
    pub lambda: f64,
}

impl ModelTemplate {
    pub fn instantiate(&self, hbar: f64, nodes: usize) -> Result<ModelSpec> {
        let grid = build_grid(self.dim, self.half_width, nodes)?;
        ModelSpec::new(
            grid,
            hbar,
            self.potential.clone(),
            self.interaction.clone(),
            self.energy,
            self.lambda,
        )
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolverSelection {
    pub hf: bool,
    pub rhf: bool,
    pub tf: bool,
}

impl Default for SolverSelection {
    fn default() -> Self {
        SolverSelection {
            hf: true,
            rhf: true,
            tf: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub template: ModelTemplate,
    /// Strictly decreasing, all positive.
    pub hbars: Vec<f64>,
    /// Probe coordinates for pointwise density rows.
    pub probes: Vec<[f64; 2]>,
    pub solvers: SolverSelection,
    /// Per-hbar node counts; default is the resolution rule.
    pub nodes_override: Option<Vec<usize>>,
    /// Node count for the (hbar-independent) TF reference solve; default is
    /// the resolution of the smallest hbar, capped at 4001.
    pub tf_nodes: Option<usize>,
    /// Solve reduced HF a second time per row at halved spacing and store
    /// the Richardson extrapolation of the energy in `e_rhf_extrapolated`.
    pub rhf_richardson: bool,
    /// Re-run the smallest-hbar point at double resolution and compare.
    pub grid_guard: bool,
    /// Baseline tolerance for the grid guard; the guard requires relative
    /// energy agreement within 10x this value.
    pub guard_tol: f64,
}

impl SweepPlan {
    pub fn new(template: ModelTemplate, hbars: Vec<f64>) -> Self {
        SweepPlan {
            template,
            hbars,
            probes: vec![[0.0, 0.0], [0.9, 0.0], [1.5, 0.0]],
            solvers: SolverSelection::default(),
            nodes_override: None,
            tf_nodes: None,
            rhf_richardson: false,
            grid_guard: true,
            // The resolution rule targets ~1% finite-difference dispersion
            // at the Fermi momentum, so the guard threshold (10x this)
            // flags anything worse than that budget.
            guard_tol: 1e-3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hbars.is_empty() {
            return Err(Error::InvalidArgument("empty hbar list".into()));
        }
        for w in self.hbars.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::InvalidArgument(
                    "hbar list must be strictly decreasing".into(),
                ));
            }
        }
        if self.hbars.iter().any(|&h| h <= 0.0) {
            return Err(Error::InvalidArgument("hbar values must be positive".into()));
        }
        if let Some(ns) = &self.nodes_override {
            if ns.len() != self.hbars.len() {
                return Err(Error::ShapeMismatch {
                    expected: self.hbars.len(),
                    got: ns.len(),
                });
            }
        }
        Ok(())
    }

    fn nodes_at(&self, idx: usize) -> usize {
        match &self.nodes_override {
            Some(ns) => ns[idx],
            None => nodes_for(self.hbars[idx], self.template.half_width),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRecord {
    pub hbar: f64,
    pub n_nodes: usize,
    pub e_hf: Option<f64>,
    pub e_rhf: Option<f64>,
    pub scaled_trace_hf: Option<f64>,
    pub scaled_trace_rhf: Option<f64>,
    /// hbar^d tr((-hbar^2 Lap + V + 1) Gamma) for the rHF state.
    pub weighted_trace_rhf: Option<f64>,
    /// |(lambda/2) hbar^{2d} Ex| at the HF state.
    pub exchange_abs: Option<f64>,
    /// exchange_abs / |e_hf|.
    pub exchange_ratio: Option<f64>,
    pub residual_hf: Option<f64>,
    pub residual_rhf: Option<f64>,
    pub degeneracy_rhf: Option<usize>,
    pub converged_hf: Option<bool>,
    pub converged_rhf: Option<bool>,
    /// Node count of the halved-spacing rHF solve, when requested.
    pub n_nodes_fine: Option<usize>,
    /// Richardson extrapolation (4 e_fine - e_coarse) / 3 of the reduced
    /// energy in the grid spacing; removes the leading dx^2 dispersion of
    /// the 3-point Laplacian, which under the dx proportional-to-hbar
    /// resolution rule is an hbar-independent offset that would otherwise
    /// mask the small-hbar tail of the convergence to Thomas-Fermi.
    pub e_rhf_extrapolated: Option<f64>,
    /// hbar^d rho at each probe, reduced HF state.
    pub probe_density: Vec<Option<f64>>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TfTargets {
    pub e_tf: f64,
    pub mass: f64,
    pub probe_values: Vec<f64>,
    pub cross: TfCrossReport,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GridGuardReport {
    pub hbar: f64,
    pub coarse_nodes: usize,
    pub fine_nodes: usize,
    pub coarse_energy: f64,
    pub fine_energy: f64,
    pub relative_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub records: Vec<SweepRecord>,
    pub tf: Option<TfTargets>,
    /// Log-log slope of |e_rhf - e_tf| against hbar; only reported when the
    /// grid guard passed (or was disabled).
    pub e_rhf_slope: Option<f64>,
    pub e_hf_slope: Option<f64>,
    /// Largest weighted trace across the sweep (the trace-bound constant).
    pub trace_bound_constant: Option<f64>,
    /// Rows whose weighted trace exceeds twice the largest-hbar value.
    pub trace_bound_violations: Vec<usize>,
    pub grid_guard: Option<GridGuardReport>,
    pub probes: Vec<[f64; 2]>,
}

fn probe_node(grid: &Grid, probe: &[f64; 2]) -> usize {
    grid.nearest_node(&probe[..grid.dim()])
}

fn density_at_probes(m: &ModelSpec, gamma: &DensityMatrix, probes: &[[f64; 2]]) -> Vec<Option<f64>> {
    let rho = gamma.density();
    probes
        .iter()
        .map(|p| Some(m.hbar_d() * rho.values()[probe_node(&m.grid, p)]))
        .collect()
}

/// Least-squares slope of ln y against ln x, skipping non-finite pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

pub fn run_sweep(plan: &SweepPlan) -> Result<SweepSummary> {
    plan.validate()?;

    // Model validation once, on a coarse instance: an invalid model is a
    // config error, not a per-row solver failure.
    {
        let probe_model = plan.template.instantiate(plan.hbars[0], plan.nodes_at(0))?;
        let report = validate_model(&probe_model, &ValidationConfig::default());
        if !report.is_valid() {
            return Err(Error::Config(format!(
                "model failed validation: {report:?}"
            )));
        }
    }

    // TF reference solve, once; targets are hbar-independent.
    let tf = if plan.solvers.tf {
        let n_tf = plan
            .tf_nodes
            .unwrap_or_else(|| {
                nodes_for(*plan.hbars.last().unwrap(), plan.template.half_width).min(4001)
            });
        let m_tf = plan.template.instantiate(1.0, n_tf)?;
        let (rho_tf, cross) = tf_cross_validate(&m_tf)?;
        let probe_values = plan
            .probes
            .iter()
            .map(|p| rho_tf.values()[probe_node(&m_tf.grid, p)])
            .collect();
        Some(TfTargets {
            e_tf: cross.fixed_point.energy,
            mass: cross.fixed_point.mass,
            probe_values,
            cross,
        })
    } else {
        None
    };

    let mut records = Vec::with_capacity(plan.hbars.len());
    for (idx, &hbar) in plan.hbars.iter().enumerate() {
        let n = plan.nodes_at(idx);
        let m = plan.template.instantiate(hbar, n)?;
        let mut record = SweepRecord {
            hbar,
            n_nodes: n,
            e_hf: None,
            e_rhf: None,
            scaled_trace_hf: None,
            scaled_trace_rhf: None,
            weighted_trace_rhf: None,
            exchange_abs: None,
            exchange_ratio: None,
            residual_hf: None,
            residual_rhf: None,
            degeneracy_rhf: None,
            converged_hf: None,
            converged_rhf: None,
            n_nodes_fine: None,
            e_rhf_extrapolated: None,
            probe_density: vec![None; plan.probes.len()],
        };

        if plan.solvers.rhf {
            match scf_solve(&m, &ScfConfig::reduced()) {
                Ok((gamma, rep)) => {
                    record.e_rhf = Some(rep.energy.total);
                    record.scaled_trace_rhf = Some(rep.scaled_trace);
                    record.weighted_trace_rhf = Some(weighted_trace(&m, &gamma));
                    record.residual_rhf = Some(rep.residual);
                    record.degeneracy_rhf = Some(rep.degeneracy);
                    record.converged_rhf = Some(rep.converged);
                    record.probe_density = density_at_probes(&m, &gamma, &plan.probes);
                }
                Err(Error::NonConvergence { .. }) => {
                    record.converged_rhf = Some(false);
                }
                Err(e) => return Err(e),
            }
            if plan.rhf_richardson {
                if let Some(coarse) = record.e_rhf {
                    // Same span, halved spacing: 2n - 1 nodes.
                    let n_fine = 2 * n - 1;
                    let m_fine = plan.template.instantiate(hbar, n_fine)?;
                    let (_, fine) = scf_solve(&m_fine, &ScfConfig::reduced())?;
                    if fine.converged {
                        record.n_nodes_fine = Some(n_fine);
                        record.e_rhf_extrapolated =
                            Some((4.0 * fine.energy.total - coarse) / 3.0);
                    }
                }
            }
        }
        if plan.solvers.hf {
            match scf_solve(&m, &ScfConfig::default()) {
                Ok((_, rep)) => {
                    record.e_hf = Some(rep.energy.total);
                    record.scaled_trace_hf = Some(rep.scaled_trace);
                    record.residual_hf = Some(rep.residual);
                    record.converged_hf = Some(rep.converged);
                    let ex = rep.energy.exchange.abs();
                    record.exchange_abs = Some(ex);
                    if rep.energy.total != 0.0 {
                        record.exchange_ratio = Some(ex / rep.energy.total.abs());
                    }
                }
                Err(Error::NonConvergence { .. }) => {
                    record.converged_hf = Some(false);
                }
                Err(e) => return Err(e),
            }
        }
        records.push(record);
    }

    // Trace bound: every row stays below twice the largest-hbar value.
    let trace_bound_constant = records
        .iter()
        .filter_map(|r| r.weighted_trace_rhf)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let trace_bound_violations = match records.first().and_then(|r| r.weighted_trace_rhf) {
        Some(first) => records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.weighted_trace_rhf.is_some_and(|v| v > 2.0 * first))
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    };

    // Grid guard: double the resolution at the smallest hbar and require
    // energy agreement, separating discretization error from the
    // semiclassical error the sweep is measuring.
    let grid_guard = if plan.grid_guard && plan.solvers.rhf {
        let idx = plan.hbars.len() - 1;
        let hbar = plan.hbars[idx];
        let coarse_nodes = plan.nodes_at(idx);
        let fine_nodes = 2 * coarse_nodes - 1;
        let coarse_energy = records[idx].e_rhf;
        let m_fine = plan.template.instantiate(hbar, fine_nodes)?;
        let fine = scf_solve(&m_fine, &ScfConfig::reduced())?;
        match coarse_energy {
            Some(coarse) => {
                let fine_e = fine.1.energy.total;
                let relative_gap = (coarse - fine_e).abs() / fine_e.abs().max(1e-300);
                Some(GridGuardReport {
                    hbar,
                    coarse_nodes,
                    fine_nodes,
                    coarse_energy: coarse,
                    fine_energy: fine_e,
                    relative_gap,
                    passed: relative_gap <= 10.0 * plan.guard_tol,
                })
            }
            None => None,
        }
    } else {
        None
    };
    let guard_ok = grid_guard.as_ref().map_or(true, |g| g.passed);

    // Convergence slopes against the TF energy, only when trustworthy.
    let (e_rhf_slope, e_hf_slope) = match (&tf, guard_ok) {
        (Some(targets), true) => {
            let gaps_rhf: Vec<f64> = records
                .iter()
                .map(|r| {
                    r.e_rhf_extrapolated
                        .or(r.e_rhf)
                        .map_or(f64::NAN, |e| (e - targets.e_tf).abs())
                })
                .collect();
            let gaps_hf: Vec<f64> = records
                .iter()
                .map(|r| r.e_hf.map_or(f64::NAN, |e| (e - targets.e_tf).abs()))
                .collect();
            (
                loglog_slope(&plan.hbars, &gaps_rhf),
                loglog_slope(&plan.hbars, &gaps_hf),
            )
        }
        _ => (None, None),
    };

    Ok(SweepSummary {
        schema_version: SCHEMA_VERSION,
        records,
        tf,
        e_rhf_slope,
        e_hf_slope,
        trace_bound_constant,
        trace_bound_violations,
        grid_guard,
        probes: plan.probes.clone(),
    })
}

fn csv_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

fn csv_opt_e(v: &Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.12e}"),
        None => String::new(),
    }
}

/// Records as CSV in the fixed `CSV_COLUMNS` order, probe columns last.
pub fn records_csv(summary: &SweepSummary) -> String {
    let mut header: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
    for k in 0..summary.probes.len() {
        header.push(format!("probe_{k}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for r in &summary.records {
        let mut cells = vec![
            format!("{:.12e}", r.hbar),
            r.n_nodes.to_string(),
            csv_opt_e(&r.e_hf),
            csv_opt_e(&r.e_rhf),
            csv_opt_e(&r.scaled_trace_hf),
            csv_opt_e(&r.scaled_trace_rhf),
            csv_opt_e(&r.weighted_trace_rhf),
            csv_opt_e(&r.exchange_abs),
            csv_opt_e(&r.exchange_ratio),
            csv_opt_e(&r.residual_hf),
            csv_opt_e(&r.residual_rhf),
            csv_opt(&r.degeneracy_rhf),
            csv_opt(&r.converged_hf),
            csv_opt(&r.converged_rhf),
            csv_opt(&r.n_nodes_fine),
            csv_opt_e(&r.e_rhf_extrapolated),
        ];
        for p in &r.probe_density {
            cells.push(csv_opt_e(p));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn summary_json(summary: &SweepSummary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes")
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PointwiseRow {
    pub hbar: f64,
    pub probe: [f64; 2],
    /// hbar^d rho_gamma at the probe.
    pub value: f64,
    /// rho_TF at the probe.
    pub target: f64,
    pub diff: f64,
}

/// Pointwise Weyl table: hbar^d rho_gamma against rho_TF at the probes.
/// Each state may live on its own grid; probes are mapped per grid.
pub fn weyl_pointwise_table(
    states: &[(f64, &DensityMatrix)],
    probes: &[[f64; 2]],
    rho_tf: &Density,
) -> Vec<PointwiseRow> {
    let tf_grid = rho_tf.grid();
    let mut rows = Vec::new();
    for &(hbar, gamma) in states {
        let grid = gamma.grid();
        let hbar_d = hbar.powi(grid.dim() as i32);
        let rho = gamma.density();
        for probe in probes {
            let value = hbar_d * rho.values()[probe_node(grid, probe)];
            let target = rho_tf.values()[probe_node(tf_grid, probe)];
            rows.push(PointwiseRow {
                hbar,
                probe: *probe,
                value,
                target,
                diff: (value - target).abs(),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HeatRow {
    pub t: f64,
    pub probe: [f64; 2],
    /// (4 pi t)^{d/2} e^{-t(-Lap + W/t)}(x, x).
    pub value: f64,
    /// e^{-W(x)}.
    pub target: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HeatReport {
    pub rows: Vec<HeatRow>,
    /// Richardson extrapolation in t from the two smallest t values,
    /// one entry per probe: (probe, extrapolated value, target, rel-error).
    pub extrapolated: Vec<HeatRow>,
}

/// Heat-kernel Tauberian table: for each t, diagonalize -Lap + W/t and
/// report the normalized diagonal against e^{-W}. The t list must be
/// strictly decreasing so the extrapolation uses the two smallest values.
pub fn heat_tauberian_report(
    grid: &Arc<Grid>,
    w: &[f64],
    probes: &[[f64; 2]],
    ts: &[f64],
) -> Result<HeatReport> {
    if w.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch {
            expected: grid.n_nodes(),
            got: w.len(),
        });
    }
    if ts.len() < 2 || ts.windows(2).any(|p| p[1] >= p[0]) || ts.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidArgument(
            "need a strictly decreasing list of at least two positive t".into(),
        ));
    }
    let d = grid.dim();
    let probe_nodes: Vec<usize> = probes.iter().map(|p| probe_node(grid, p)).collect();
    let mut rows = Vec::new();
    for &t in ts {
        let mut mat = kinetic_matrix(grid, 1.0).matrix().clone();
        for i in 0..grid.n_nodes() {
            mat[(i, i)] += w[i] / t;
        }
        let op = OperatorMatrix::new(grid.clone(), mat)?;
        let spectral = SpectralData::compute(&op)?;
        let norm = (4.0 * std::f64::consts::PI * t).powf(d as f64 / 2.0);
        for (probe, &node) in probes.iter().zip(&probe_nodes) {
            let value = norm * spectral.heat_diag(t, node)?;
            let target = (-w[node]).exp();
            rows.push(HeatRow {
                t,
                probe: *probe,
                value,
                target,
                rel_error: (value - target).abs() / target.abs().max(1e-300),
            });
        }
    }
    // Linear-in-t Richardson step on the two smallest t.
    let np = probes.len();
    let n_t = ts.len();
    let mut extrapolated = Vec::with_capacity(np);
    let (t0, t1) = (ts[n_t - 2], ts[n_t - 1]);
    for (k, probe) in probes.iter().enumerate() {
        let v0 = rows[(n_t - 2) * np + k].value;
        let v1 = rows[(n_t - 1) * np + k].value;
        let value = v1 + (v1 - v0) * t1 / (t0 - t1);
        let target = rows[(n_t - 1) * np + k].target;
        extrapolated.push(HeatRow {
            t: 0.0,
            probe: *probe,
            value,
            target,
            rel_error: (value - target).abs() / target.abs().max(1e-300),
        });
    }
    Ok(HeatReport { rows, extrapolated })
}

/// Minimal SVG line plot: one polyline per named series, linear axes with
/// tick labels at the extremes.
pub fn plot_svg(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() || x1 <= x0 {
        x0 = 0.0;
        x1 = 1.0;
    }
    if !y0.is_finite() || y1 <= y0 {
        y0 = 0.0;
        y1 = 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f6f8b", "#c0392b", "#27ae60", "#8e44ad", "#d35400"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        W / 2.0
    ));
    // Axes.
    s.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M,
        W - M,
        H - M
    ));
    s.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M
    ));
    for (v, x, y, anchor) in [
        (x0, M, H - M + 18.0, "middle"),
        (x1, W - M, H - M + 18.0, "middle"),
        (y0, M - 6.0, H - M, "end"),
        (y1, M - 6.0, M, "end"),
    ] {
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-size=\"11\">{v:.3e}</text>\n"
        ));
    }
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            W - M + 4.0,
            M + 16.0 * k as f64
        ));
    }
    s.push_str("</svg>\n");
    s
}
