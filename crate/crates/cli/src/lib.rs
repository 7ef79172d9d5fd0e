//! Batch commands that turn a run configuration into tables and reports.

pub mod config;
pub mod error;
pub mod sweep;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use vibsim_core::calibrate::fit_source;
use vibsim_core::fock::DEFAULT_TAIL_TOLERANCE;
use vibsim_core::metrics::{closest_classical, total_bound, tvd, witness};
use vibsim_core::optimize::{monte_carlo_fidelity, optimize_experiment, FreeParameters, NelderMeadOptions};
use vibsim_core::sampler::{estimate_fc, sample, StatErrorMethod};
use vibsim_core::vibronic::{fc_factors, spectrum};
use vibsim_core::histogram::sidecar_path;
use vibsim_core::{CountHistogram, FCTable, Source};

pub use config::{RunConfig, DEFAULT_CUTOFF};
pub use error::{CliError, CliResult};

/// Settings shared by every command; flags override the config file.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: Option<RunConfig>,
    pub seed: Option<u64>,
    pub cutoff: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub grid: Option<String>,
}

impl Invocation {
    pub fn config(&self) -> CliResult<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::Input("this command needs --config".into()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.or(self.config.as_ref().and_then(|c| c.seed)).unwrap_or(0)
    }

    pub fn cutoff(&self) -> CliResult<usize> {
        let cutoff = self
            .cutoff
            .or(self.config.as_ref().and_then(|c| c.cutoff))
            .unwrap_or(DEFAULT_CUTOFF);
        if cutoff == 0 {
            return Err(CliError::Input("cutoff must be at least 1".into()));
        }
        Ok(cutoff)
    }

    pub fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = self
            .out_dir
            .clone()
            .or(self.config.as_ref().and_then(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn mode_header(m: usize) -> String {
    (1..=m).map(|k| format!("m{k}")).collect::<Vec<_>>().join(",")
}

fn outcome_cells(outcome: &[usize]) -> String {
    outcome.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
}

fn distribution_csv(table: &FCTable) -> String {
    let mut out = format!("{},probability\n", mode_header(table.num_modes()));
    for (outcome, p) in table.iter() {
        let _ = writeln!(out, "{},{p}", outcome_cells(outcome));
    }
    out
}

fn check_tail(tail_mass: f64) -> CliResult<()> {
    if tail_mass > DEFAULT_TAIL_TOLERANCE {
        return Err(CliError::Convergence(format!(
            "tail mass {tail_mass:.3e} exceeds {DEFAULT_TAIL_TOLERANCE:.0e}; raise --cutoff"
        )));
    }
    Ok(())
}

/// Outputs written by one command, and the JSON printed to stdout.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
    /// Set when outputs were written but a convergence check failed.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn new(files: Vec<PathBuf>, summary: serde_json::Value) -> Self {
        Self {
            files,
            summary,
            failure: None,
        }
    }

    fn failing_if(mut self, check: CliResult<()>) -> Self {
        self.failure = check.err();
        self
    }
}

/// Franck-Condon factors and stick spectrum of the target.
pub fn cmd_ideal(inv: &Invocation) -> CliResult<Outcome> {
    let config = inv.config()?;
    let resolved = config.target()?;
    let cutoff = inv.cutoff()?;
    let dir = inv.out_dir()?;
    let fc = fc_factors(&resolved.target, cutoff)?;
    let m = fc.num_modes();

    let mut csv = format!("{},frequency_cm1,probability\n", mode_header(m));
    for (outcome, p) in fc.iter() {
        let freq = match &resolved.excited_freqs {
            Some(w) => outcome.iter().zip(w).map(|(&k, &w)| k as f64 * w).sum::<f64>().to_string(),
            None => String::new(),
        };
        let _ = writeln!(csv, "{},{freq},{p}", outcome_cells(outcome));
    }
    let table_path = dir.join("fc_table.csv");
    write_text(&table_path, &csv)?;

    let peaks = match &resolved.excited_freqs {
        Some(w) => Some(spectrum(&fc, w)?),
        None => None,
    };
    let summary = json!({
        "cutoff": cutoff,
        "tail_mass": fc.tail_mass(),
        "converged": fc.tail_mass() <= DEFAULT_TAIL_TOLERANCE,
        "squeezing": resolved.target.squeezing(),
        "beam_splitter_angle": resolved.target.beam_splitter_angle(),
        "outcomes": fc.len(),
        "spectrum": peaks,
    });
    let summary_path = dir.join("ideal_summary.json");
    write_json(&summary_path, &summary)?;
    Ok(Outcome::new(vec![table_path, summary_path], summary).failing_if(check_tail(fc.tail_mass())))
}

/// Observed statistics of the configured experiment and its error budget.
pub fn cmd_simulate(inv: &Invocation) -> CliResult<Outcome> {
    let config = inv.config()?;
    let target = config.target()?.target;
    let cutoff = inv.cutoff()?;
    let seed = inv.seed();
    let dir = inv.out_dir()?;

    let mut model = config.experiment()?;
    let mut optimizer_converged = true;
    if config.optimize {
        let opt = optimize_experiment(&model, &target, FreeParameters::default(), NelderMeadOptions::default())?;
        optimizer_converged = opt.converged;
        model = opt.model;
    }
    let fidelity = model.model_fidelity(&target)?;
    let observed = model.observed_distribution_gaussian(cutoff)?;
    let ideal = fc_factors(&target, cutoff)?;
    let tvd_to_ideal = tvd(&observed, &ideal)?;

    let (eps_stat, tvd_sampled) = match config.shots {
        Some(shots) => {
            let hist = sample(&observed, shots, seed)?;
            let method = config.stat_error.unwrap_or(StatErrorMethod::bootstrap(seed));
            let est = estimate_fc(&hist, method)?;
            (est.eps_stat, Some(tvd(&est.table, &ideal)?))
        }
        None => (0.0, None),
    };
    let budget = total_bound(fidelity, eps_stat, config.eps_g)?;

    let mc = match &config.uncertainties {
        Some(unc) => Some(monte_carlo_fidelity(&model, &target, unc, config.monte_carlo_samples, seed)?),
        None => None,
    };
    let bench = closest_classical(&target)?;
    let margin_sigmas = match &mc {
        Some(mc) if mc.std > 0.0 => Some(witness(fidelity, mc.std, &bench)?.margin_sigmas),
        _ => None,
    };
    let tail_mass = observed.tail_mass().max(ideal.tail_mass());

    let summary = json!({
        "model": model,
        "optimized": config.optimize,
        "fidelity": budget.fidelity,
        "fidelity_bound": budget.fidelity_bound,
        "eps_stat": budget.eps_stat,
        "eps_g": budget.eps_g,
        "total": budget.total,
        "tvd_to_ideal": tvd_to_ideal,
        "tvd_sampled_to_ideal": tvd_sampled,
        "tail_mass": tail_mass,
        "monte_carlo": mc.as_ref().map(|mc| json!({"mean": mc.mean, "std": mc.std, "clamped": mc.clamped})),
        "witness": {
            "classical_fidelity": bench.classical_fidelity,
            "classical_bound": bench.classical_bound,
            "passes": fidelity > bench.classical_fidelity,
            "margin": fidelity - bench.classical_fidelity,
            "margin_sigmas": margin_sigmas,
        },
    });
    let observed_path = dir.join("observed.csv");
    write_text(&observed_path, &distribution_csv(&observed))?;
    let report_path = dir.join("simulate_report.json");
    write_json(&report_path, &summary)?;
    let check = check_tail(tail_mass).and_then(|_| converged(optimizer_converged));
    Ok(Outcome::new(vec![observed_path, report_path], summary).failing_if(check))
}

fn converged(flag: bool) -> CliResult<()> {
    if flag {
        Ok(())
    } else {
        Err(CliError::Convergence("optimizer hit its iteration limit".into()))
    }
}

/// Best controllable parameters and the Monte Carlo spread around them.
pub fn cmd_optimize(inv: &Invocation) -> CliResult<Outcome> {
    let config = inv.config()?;
    let target = config.target()?.target;
    let template = config.experiment()?;
    let dir = inv.out_dir()?;
    let opt = optimize_experiment(&template, &target, FreeParameters::default(), NelderMeadOptions::default())?;
    let unc = config.uncertainties.unwrap_or_default();
    let mc = monte_carlo_fidelity(&opt.model, &target, &unc, config.monte_carlo_samples, inv.seed())?;
    let r_star = match opt.model.source {
        Source::Tmsv { r } => json!(r),
        Source::SmsvPair { r1, r2 } => json!([r1, r2]),
    };
    let summary = json!({
        "r_star": r_star,
        "t_star": opt.model.bs_transmission,
        "F_star": opt.fidelity,
        "F_start": opt.start_fidelity,
        "F_mc_mean": mc.mean,
        "F_mc_std": mc.std,
        "mc_clamped": mc.clamped,
        "iterations": opt.iterations,
        "converged": opt.converged,
        "model": opt.model,
    });
    let path = dir.join("optimize.json");
    write_json(&path, &summary)?;
    Ok(Outcome::new(vec![path], summary).failing_if(converged(opt.converged)))
}

/// Fidelity-versus-loss curves.
pub fn cmd_sweep_loss(inv: &Invocation) -> CliResult<Outcome> {
    let config = inv.config()?;
    let target = config.target()?.target;
    let dir = inv.out_dir()?;
    let grid_spec = inv
        .grid
        .clone()
        .or(config.grid.clone())
        .unwrap_or_else(|| sweep::DEFAULT_GRID.to_string());
    let grid = sweep::parse_grid(&grid_spec)?;
    let settings = match config.experiment {
        Some(m) => {
            m.validate()?;
            sweep::SweepSettings {
                detector: m.detector,
                distinguishability: m.distinguishability,
            }
        }
        None => sweep::SweepSettings::default(),
    };
    let rows = sweep::sweep_loss(&target, &grid, &settings)?;
    let mut csv = format!("{}\n", sweep::CSV_HEADER);
    for row in &rows {
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    let path = dir.join("sweep_loss.csv");
    write_text(&path, &csv)?;
    let summary = json!({ "rows": rows.len(), "classical_threshold": rows[0].classical_threshold });
    Ok(Outcome::new(vec![path], summary))
}

/// Source parameters from the 100:0 and 0:100 histograms.
pub fn cmd_tomography(inv: &Invocation, hist_100_0: &Path, hist_0_100: &Path) -> CliResult<Outcome> {
    let read = |p: &Path| CountHistogram::read(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())));
    let a = read(hist_100_0)?;
    let b = read(hist_0_100)?;
    let config = inv.config.as_ref();
    let detector = config
        .and_then(|c| c.experiment)
        .map(|m| m.detector)
        .unwrap_or_default();
    let options = config.and_then(|c| c.fit).unwrap_or_default();
    let dir = inv.out_dir()?;
    let fit = fit_source(&a, &b, &detector, options)?;
    let summary = json!({
        "r": fit.r,
        "eta": fit.eta,
        "residual_tvd": fit.residual_tvd,
        "converged": fit.converged,
        "at_bounds": fit.at_bounds,
        "detector": detector,
    });
    let path = dir.join("tomography.json");
    write_json(&path, &summary)?;
    Ok(Outcome::new(vec![path], summary).failing_if(converged(fit.converged)))
}

/// Finite-shot histogram of the experiment, or of the target when no
/// experiment is configured.
pub fn cmd_sample(inv: &Invocation) -> CliResult<Outcome> {
    let config = inv.config()?;
    let cutoff = inv.cutoff()?;
    let seed = inv.seed();
    let shots = config
        .shots
        .ok_or_else(|| CliError::Input("config has no shots".into()))?;
    let dir = inv.out_dir()?;
    let source = match config.experiment {
        Some(_) => config.experiment()?.observed_distribution_gaussian(cutoff)?,
        None => fc_factors(&config.target()?.target, cutoff)?,
    };
    let hist = sample(&source, shots, seed)?;
    let method = config.stat_error.unwrap_or(StatErrorMethod::bootstrap(seed));
    let est = estimate_fc(&hist, method)?;
    let path = dir.join("counts.csv");
    hist.write(&path)?;
    let summary = json!({
        "shots": shots,
        "seed": seed,
        "eps_stat": est.eps_stat,
        "tvd_to_source": tvd(&est.table, &source)?,
        "source_tail_mass": source.tail_mass(),
    });
    let summary_path = dir.join("sample_summary.json");
    write_json(&summary_path, &summary)?;
    Ok(Outcome::new(vec![sidecar_path(&path), path, summary_path], summary).failing_if(check_tail(source.tail_mass())))
}
