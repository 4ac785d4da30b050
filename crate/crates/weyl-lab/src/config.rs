//! TOML configuration files for the CLI: a `[model]` table shared by every
//! subcommand plus optional per-experiment sections.

use crate::harness::{nodes_for, ModelTemplate, SolverSelection, SweepPlan};
use crate::lattice::{build_grid, InteractionSpec, ModelSpec, PotentialSpec};
use crate::{Error, Result};
use serde::Deserialize;
use std::path::Path;

fn default_dim() -> usize {
    1
}
fn default_lambda() -> f64 {
    1.0
}
fn default_n_xi() -> usize {
    129
}
fn default_modes() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub half_width: f64,
    /// Grid nodes per axis; default follows the hbar resolution rule.
    pub nodes: Option<usize>,
    /// Default hbar for single-model commands; `--hbar` overrides.
    pub hbar: Option<f64>,
    pub energy: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub potential: PotentialSpec,
    pub interaction: InteractionSpec,
}

impl ModelConfig {
    pub fn template(&self) -> ModelTemplate {
        ModelTemplate {
            dim: self.dim,
            half_width: self.half_width,
            potential: self.potential.clone(),
            interaction: self.interaction.clone(),
            energy: self.energy,
            lambda: self.lambda,
        }
    }

    /// Instantiates the model; `hbar_override` takes priority over the
    /// config's `hbar` field.
    pub fn build(&self, hbar_override: Option<f64>) -> Result<ModelSpec> {
        let hbar = hbar_override.or(self.hbar).ok_or_else(|| {
            Error::Config("no hbar: set `hbar` in [model] or pass --hbar".into())
        })?;
        let nodes = self
            .nodes
            .unwrap_or_else(|| nodes_for(hbar, self.half_width));
        self.template().instantiate(hbar, nodes)
    }

    /// Grid for hbar-independent work (TF, heat): explicit `nodes` or a
    /// fixed moderate default.
    pub fn reference_grid(&self) -> Result<std::sync::Arc<crate::lattice::Grid>> {
        build_grid(self.dim, self.half_width, self.nodes.unwrap_or(1201))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub hbars: Vec<f64>,
    pub probes: Option<Vec<Vec<f64>>>,
    pub solvers: Option<SolverSelection>,
    pub nodes_override: Option<Vec<usize>>,
    pub tf_nodes: Option<usize>,
    pub rhf_richardson: Option<bool>,
    pub grid_guard: Option<bool>,
    pub guard_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScfSection {
    /// `false` runs reduced Hartree-Fock only.
    pub exchange: Option<bool>,
    pub max_iters: Option<usize>,
    /// Fixed mixing weight instead of optimal damping.
    pub fixed_alpha: Option<f64>,
    pub divergence_floor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSection {
    /// Strictly decreasing list of heat times.
    pub ts: Vec<f64>,
    pub probes: Option<Vec<Vec<f64>>>,
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HusimiSection {
    #[serde(default = "default_n_xi")]
    pub n_xi: usize,
    /// Momentum half-width; default 2 sqrt(max(E - min V, 1)).
    pub xi_half_width: Option<f64>,
}

impl Default for HusimiSection {
    fn default() -> Self {
        HusimiSection {
            n_xi: default_n_xi(),
            xi_half_width: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManybodySection {
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Largest particle sector; default = modes.
    pub n_max: Option<usize>,
}

impl Default for ManybodySection {
    fn default() -> Self {
        ManybodySection {
            modes: default_modes(),
            n_max: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelConfig,
    pub sweep: Option<SweepSection>,
    pub scf: Option<ScfSection>,
    pub heat: Option<HeatSection>,
    pub husimi: Option<HusimiSection>,
    pub manybody: Option<ManybodySection>,
}

impl ConfigFile {
    pub fn sweep_plan(&self) -> Result<SweepPlan> {
        let section = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [sweep] section".into()))?;
        let mut plan = SweepPlan::new(self.model.template(), section.hbars.clone());
        if let Some(probes) = &section.probes {
            plan.probes = probes
                .iter()
                .map(|p| match p.as_slice() {
                    [x] => Ok([*x, 0.0]),
                    [x, y] => Ok([*x, *y]),
                    _ => Err(Error::Config("probes must have 1 or 2 coordinates".into())),
                })
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some(s) = section.solvers {
            plan.solvers = s;
        }
        plan.nodes_override = section.nodes_override.clone();
        plan.tf_nodes = section.tf_nodes;
        if let Some(r) = section.rhf_richardson {
            plan.rhf_richardson = r;
        }
        if let Some(g) = section.grid_guard {
            plan.grid_guard = g;
        }
        if let Some(t) = section.guard_tol {
            plan.guard_tol = t;
        }
        Ok(plan)
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
