use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vibsim_cli::{
    cmd_ideal, cmd_optimize, cmd_sample, cmd_simulate, cmd_sweep_loss, cmd_tomography, CliResult, Invocation,
    Outcome, RunConfig,
};

/// Simulate imperfect quantum-optical vibronic spectroscopy experiments.
#[derive(Parser)]
#[command(name = "vibsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Photon-number cutoff per mode [default: 30].
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Franck-Condon factors and spectrum of the target.
    Ideal(Common),
    /// Observed statistics and error budget of the configured experiment.
    Simulate(Common),
    /// Optimize squeezing and splitter, then Monte Carlo the result.
    Optimize(Common),
    /// Maximum fidelity against balanced loss for four source models.
    SweepLoss {
        #[command(flatten)]
        common: Common,
        /// `start:stop:step` or a comma-separated list of losses.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Fit the source to histograms taken at 100:0 and 0:100.
    Tomography {
        #[command(flatten)]
        common: Common,
        hist_100_0: PathBuf,
        hist_0_100: PathBuf,
    },
    /// Draw a finite-shot histogram.
    Sample(Common),
}

fn invocation(common: Common, grid: Option<String>) -> CliResult<Invocation> {
    Ok(Invocation {
        config: common.config.as_deref().map(RunConfig::load).transpose()?,
        seed: common.seed,
        cutoff: common.cutoff,
        out_dir: common.out_dir,
        grid,
    })
}

fn run(command: Command) -> CliResult<Outcome> {
    match command {
        Command::Ideal(c) => cmd_ideal(&invocation(c, None)?),
        Command::Simulate(c) => cmd_simulate(&invocation(c, None)?),
        Command::Optimize(c) => cmd_optimize(&invocation(c, None)?),
        Command::SweepLoss { common, grid } => cmd_sweep_loss(&invocation(common, grid)?),
        Command::Tomography {
            common,
            hist_100_0,
            hist_0_100,
        } => cmd_tomography(&invocation(common, None)?, &hist_100_0, &hist_0_100),
        Command::Sample(c) => cmd_sample(&invocation(c, None)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.summary).expect("summary is valid JSON");
            let _ = writeln!(std::io::stdout(), "{text}");
            for file in &outcome.files {
                eprintln!("wrote {}", file.display());
            }
            match outcome.failure {
                Some(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(err.exit_code() as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
