use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{assemble, ExperimentConfig, Kind};
use crate::error::{CliError, CliResult};
use crate::plot::emit_plot_script;
use crate::run::{execute, threads_from_env};

#[derive(Debug, Parser)]
#[command(name = "autodrop-lab", version, about = "Learning-rate drop experiments on quadratic models and synthetic classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` overrides applied on top of the config file.
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed-rate descent curves for several learning rates.
    #[command(name = "nqm-sweep")]
    NqmSweep(RunArgs),
    /// Automatic learning-rate drops on the quadratic model.
    #[command(name = "nqm-autodrop")]
    NqmAutodrop(RunArgs),
    /// Closed-form steady state against a Monte Carlo estimate.
    #[command(name = "oracle-check")]
    OracleCheck(RunArgs),
    /// Check a piecewise schedule against the drop-gap constraints.
    #[command(name = "schedule-validate")]
    ScheduleValidate(RunArgs),
    /// Phase plan of the derivative-threshold scheduler.
    #[command(name = "alg2-plan")]
    Alg2Plan(RunArgs),
    /// Train a classifier on Gaussian blobs.
    #[command(name = "train")]
    Train(RunArgs),
    /// Regenerate the plotting script for a finished run.
    #[command(name = "plot-script")]
    PlotScript { manifest: PathBuf },
    /// Print the default config of an experiment kind.
    #[command(name = "default-config")]
    DefaultConfig { kind: String },
}

impl Command {
    fn run_args(&self) -> Option<(Kind, &RunArgs)> {
        Some(match self {
            Command::NqmSweep(a) => (Kind::NqmSweep, a),
            Command::NqmAutodrop(a) => (Kind::NqmAutodrop, a),
            Command::OracleCheck(a) => (Kind::OracleCheck, a),
            Command::ScheduleValidate(a) => (Kind::ScheduleValidate, a),
            Command::Alg2Plan(a) => (Kind::Alg2Plan, a),
            Command::Train(a) => (Kind::Train, a),
            Command::PlotScript { .. } | Command::DefaultConfig { .. } => return None,
        })
    }
}

pub fn config_from_args(kind: Kind, args: &RunArgs) -> CliResult<ExperimentConfig> {
    let text = match &args.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?),
        None => None,
    };
    assemble(kind, text.as_deref(), &args.overrides, args.seed, args.out.clone())
}

fn dispatch(command: &Command) -> CliResult<()> {
    if let Some((kind, args)) = command.run_args() {
        let cfg = config_from_args(kind, args)?;
        let summary = execute(&cfg, threads_from_env()?)?;
        println!("{}", summary.manifest.display());
        return Ok(());
    }
    match command {
        Command::PlotScript { manifest } => {
            println!("{}", emit_plot_script(manifest)?.display());
        }
        Command::DefaultConfig { kind } => {
            print!("{}", ExperimentConfig::defaults(kind.parse()?).to_toml_string());
        }
        _ => unreachable!("run commands handled above"),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
