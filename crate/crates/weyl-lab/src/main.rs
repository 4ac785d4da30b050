//! Command-line front end: validation, single solves, hbar-sweeps, and the
//! phase-space / heat / many-body experiments, driven by TOML config files.
//!
//! Exit codes: 0 success, 2 invalid config or arguments, 3 solver
//! non-convergence, 4 internal invariant violation.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use weyl_lab::config::{load_config, ConfigFile};
use weyl_lab::energies::TfConstants;
use weyl_lab::harness::{
    heat_tauberian_report, plot_svg, records_csv, summary_json, HeatReport, SweepSummary,
};
use weyl_lab::lattice::{validate_model, ValidationConfig};
use weyl_lab::manybody::{best_slater, grand_canonical_ground, project_modes};
use weyl_lab::phase_space::{
    bathtub_lift, husimi_transform, kinetic_identity_check, CoherentFamily, PhaseGrid,
};
use weyl_lab::scf::{scf_solve, LineSearch, ScfConfig};
use weyl_lab::thomas_fermi::{density_text, tf_cross_validate};
use weyl_lab::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(name = "weyl-lab", about = "Semiclassical mean-field laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for result files; stdout only when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tabular output format where applicable.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Emit simple SVG line plots alongside sweep outputs.
    #[arg(long, global = true)]
    plot: bool,
    /// Seed for the randomized self-checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check kernel evenness/repulsivity and potential confinement.
    Validate { config: PathBuf },
    /// Solve the Thomas-Fermi problem both ways and cross-check.
    Tf { config: PathBuf },
    /// Self-consistent-field solve at one hbar.
    Scf {
        config: PathBuf,
        #[arg(long)]
        hbar: Option<f64>,
    },
    /// Run the hbar-sweep described by the plan's [sweep] section.
    Sweep { plan: PathBuf },
    /// Heat-kernel Tauberian table for the shifted potential.
    Heat { config: PathBuf },
    /// Husimi transform of an SCF minimizer plus identity checks.
    Husimi {
        config: PathBuf,
        #[arg(long)]
        hbar: Option<f64>,
    },
    /// Toy-scale exact diagonalization and the e_h <= e^HF check.
    Manybody { config: PathBuf },
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::InternalInvariant(_) => ExitCode::from(4),
        Error::NonConvergence { .. }
        | Error::EnergyDiverged { .. }
        | Error::MomentumGridTooSmall { .. }
        | Error::OccupancyViolation(_) => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn write_out(out: &Option<PathBuf>, name: &str, contents: &str) -> weyl_lab::Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn scf_config(cfg: &ConfigFile, include_exchange: bool) -> ScfConfig {
    let mut sc = ScfConfig {
        include_exchange,
        ..ScfConfig::default()
    };
    if let Some(section) = &cfg.scf {
        if let Some(m) = section.max_iters {
            sc.max_iters = m;
        }
        if let Some(a) = section.fixed_alpha {
            sc.line_search = LineSearch::FixedAlpha(a);
        }
        if let Some(f) = section.divergence_floor {
            sc.divergence_floor = f;
        }
    }
    sc
}

fn probes_from(list: &Option<Vec<Vec<f64>>>) -> weyl_lab::Result<Vec<[f64; 2]>> {
    match list {
        None => Ok(vec![[0.0, 0.0]]),
        Some(ps) => ps
            .iter()
            .map(|p| match p.as_slice() {
                [x] => Ok([*x, 0.0]),
                [x, y] => Ok([*x, *y]),
                _ => Err(Error::Config("probes must have 1 or 2 coordinates".into())),
            })
            .collect(),
    }
}

fn run(cli: &Cli) -> weyl_lab::Result<()> {
    match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Tf { config } => cmd_tf(config, cli),
        Command::Scf { config, hbar } => cmd_scf(config, *hbar, cli),
        Command::Sweep { plan } => cmd_sweep(plan, cli),
        Command::Heat { config } => cmd_heat(config, cli),
        Command::Husimi { config, hbar } => cmd_husimi(config, *hbar, cli),
        Command::Manybody { config } => cmd_manybody(config, cli),
    }
}

fn cmd_validate(path: &Path) -> weyl_lab::Result<()> {
    let cfg = load_config(path)?;
    let m = cfg.model.build(cfg.model.hbar.or(Some(1.0)))?;
    let report = validate_model(&m, &ValidationConfig::default());
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if !report.is_valid() {
        return Err(Error::Config("model failed validation".into()));
    }
    Ok(())
}

fn cmd_tf(path: &Path, cli: &Cli) -> weyl_lab::Result<()> {
    let cfg = load_config(path)?;
    let grid = cfg.model.reference_grid()?;
    let m = cfg.model.template().instantiate(1.0, grid.n_nodes())?;
    let (rho, cross) = tf_cross_validate(&m)?;
    println!("{}", serde_json::to_string_pretty(&cross).expect("report serializes"));
    write_out(&cli.out, "tf_density.txt", &density_text(&rho))?;
    write_out(
        &cli.out,
        "tf_report.json",
        &serde_json::to_string_pretty(&cross).expect("report serializes"),
    )?;
    if !cross.fixed_point.converged || !cross.gradient.converged {
        return Err(Error::NonConvergence {
            iters: cross.fixed_point.iterations.max(cross.gradient.iterations),
            residual: cross.fixed_point.residual.max(cross.gradient.residual),
        });
    }
    Ok(())
}

fn cmd_scf(path: &Path, hbar: Option<f64>, cli: &Cli) -> weyl_lab::Result<()> {
    let cfg = load_config(path)?;
    let m = cfg.model.build(hbar)?;
    let include_exchange = cfg.scf.as_ref().and_then(|s| s.exchange).unwrap_or(true);
    let (gamma, report) = scf_solve(&m, &scf_config(&cfg, include_exchange))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    match cli.format {
        Format::Csv => write_out(&cli.out, "scf_trajectory.csv", &report.trajectory_csv())?,
        Format::Json => {}
    }
    write_out(
        &cli.out,
        "scf_report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_out(&cli.out, "scf_density.txt", &density_text(&gamma.density()))?;
    if !report.converged {
        return Err(Error::NonConvergence {
            iters: report.iterations,
            residual: report.residual,
        });
    }
    Ok(())
}

fn sweep_plots(summary: &SweepSummary) -> Vec<(String, String)> {
    let mut plots = Vec::new();
    if let Some(tf) = &summary.tf {
        let gaps: Vec<(f64, f64)> = summary
            .records
            .iter()
            .filter_map(|r| r.e_rhf.map(|e| (r.hbar, (e - tf.e_tf).abs())))
            .collect();
        if !gaps.is_empty() {
            plots.push((
                "energy_gap.svg".to_string(),
                plot_svg("|e_rhf - e_tf| vs hbar", &[("rhf", gaps)]),
            ));
        }
    }
    let traces: Vec<(f64, f64)> = summary
        .records
        .iter()
        .filter_map(|r| r.scaled_trace_rhf.map(|v| (r.hbar, v)))
        .collect();
    if !traces.is_empty() {
        plots.push((
            "scaled_trace.svg".to_string(),
            plot_svg("hbar^d tr gamma vs hbar", &[("rhf", traces)]),
        ));
    }
    plots
}

fn cmd_sweep(path: &Path, cli: &Cli) -> weyl_lab::Result<()> {
    let cfg = load_config(path)?;
    let plan = cfg.sweep_plan()?;
    let summary = weyl_lab::harness::run_sweep(&plan)?;
    match cli.format {
        Format::Csv => println!("{}", records_csv(&summary)),
        Format::Json => println!("{}", summary_json(&summary)),
    }
    write_out(&cli.out, "records.csv", &records_csv(&summary))?;
    write_out(&cli.out, "summary.json", &summary_json(&summary))?;
    if cli.plot {
        for (name, svg) in sweep_plots(&summary) {
            write_out(&cli.out, &name, &svg)?;
        }
    }
    let unconverged = summary.records.iter().any(|r| {
        r.converged_rhf == Some(false) || r.converged_hf == Some(false)
    });
    if unconverged {
        return Err(Error::NonConvergence {
            iters: 0,
            residual: f64::NAN,
        });
    }
    Ok(())
}

fn heat_csv(report: &HeatReport) -> String {
    let mut s = String::from("t,x,y,value,target,rel_error\n");
    for row in report.rows.iter().chain(&report.extrapolated) {
        s.push_str(&format!(
            "{:.6e},{:.6e},{:.6e},{:.12e},{:.12e},{:.6e}\n",
            row.t, row.probe[0], row.probe[1], row.value, row.target, row.rel_error
        ));
    }
    s
}

fn cmd_heat(path: &Path, cli: &Cli) -> weyl_lab::Result<()> {
    let cfg = load_config(path)?;
    let section = cfg
        .heat
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [heat] section".into()))?;
    let grid = weyl_lab::lattice::build_grid(
        cfg.model.dim,
        cfg.model.half_width,
        section.nodes.unwrap_or(801),
    )?;
    let w: Vec<f64> = (0..grid.n_nodes())
        .map(|i| {
            let c = grid.coord(i);
            cfg.model.potential.eval(&c[..grid.dim()]) - cfg.model.energy
        })
        .collect();
    let probes = probes_from(&section.probes)?;
    let report = heat_tauberian_report(&grid, &w, &probes, &section.ts)?;
    match cli.format {
        Format::Csv => println!("{}", heat_csv(&report)),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
    }
    write_out(&cli.out, "heat.csv", &heat_csv(&report))?;
    Ok(())
}

fn cmd_husimi(path: &Path, hbar: Option<f64>, cli: &Cli) -> weyl_lab::Result<()> {
    let cfg = load_config(path)?;
    let m = cfg.model.build(hbar)?;
    let section = cfg.husimi.clone().unwrap_or_default();
    let pg = Arc::new(match section.xi_half_width {
        Some(xi) => PhaseGrid::new(m.grid.clone(), xi, section.n_xi)?,
        None => PhaseGrid::for_model(&m, section.n_xi)?,
    });
    let fam = CoherentFamily::new(m.hbar, m.grid.dim())?;
    let (gamma, scf_report) = scf_solve(&m, &scf_config(&cfg, true))?;
    let field = husimi_transform(&gamma, &fam, &pg)?;
    let identities = kinetic_identity_check(&gamma, &fam, &pg, &m)?;
    let max_occ = field.values().iter().cloned().fold(0.0f64, f64::max);
    let trace_gap = {
        let mass = field.phase_space_mass();
        let target = m.hbar_d() * gamma.trace();
        (mass - target).abs() / target.abs().max(1e-300)
    };
    // Bathtub comparison against the TF density on the same grid.
    let tf_energy_gap = {
        let (rho_tf, cross) = tf_cross_validate(&m)?;
        let consts = TfConstants::for_dim(m.grid.dim());
        let lifted = bathtub_lift(&rho_tf, &consts, &pg)?;
        let ev = weyl_lab::energies::vlasov_energy(&m, &lifted)?.total;
        (ev - cross.fixed_point.energy).abs() / cross.fixed_point.energy.abs().max(1e-300)
    };
    let summary = serde_json::json!({
        "scf_converged": scf_report.converged,
        "max_occupancy": max_occ,
        "kinetic_identity": identities,
        "trace_identity_rel_error": trace_gap,
        "bathtub_vs_tf_rel_error": tf_energy_gap,
        "seed": cli.seed,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    write_out(&cli.out, "husimi_field.txt", &field.to_text())?;
    write_out(
        &cli.out,
        "husimi_report.json",
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(())
}

fn cmd_manybody(path: &Path, cli: &Cli) -> weyl_lab::Result<()> {
    let cfg = load_config(path)?;
    let m = cfg.model.build(None)?;
    let section = cfg.manybody.clone().unwrap_or_default();
    let basis = project_modes(&m, section.modes)?;
    let spectrum = grand_canonical_ground(&basis, section.n_max.unwrap_or(section.modes))?;
    let (e_hf, mask) = best_slater(&basis);
    let summary = serde_json::json!({
        "modes": section.modes,
        "spectrum": spectrum,
        "e_hf_truncated": e_hf,
        "hf_occupation_mask": mask,
        "ordering_holds": spectrum.e_h <= e_hf + 1e-8,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    write_out(
        &cli.out,
        "manybody_report.json",
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    if spectrum.e_h > e_hf + 1e-8 {
        return Err(Error::InternalInvariant(
            "many-body ground energy exceeded the Hartree-Fock bound".into(),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: failed to configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
