use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sirlab::experiments::Suite;
use sirlab::stability::EquilibriumKind;

mod artifacts;
mod commands;
mod config;

use artifacts::OutputDir;
use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0} experiment(s) failed")]
    VerificationFailed(usize),
    #[error(transparent)]
    Model(#[from] sirlab::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Model(e) => match e {
                sirlab::Error::Divergence { .. } => 3,
                sirlab::Error::MissingEquilibrium { .. } => 4,
                _ => 2,
            },
        }
    }
}

/// Simulation and analysis of the reaction-diffusion SIR model with
/// demography.
///
/// Exit codes: 0 ok, 1 verification failed, 2 configuration error,
/// 3 divergence, 4 missing equilibrium.
#[derive(Debug, Parser)]
#[command(name = "sirlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the constant equilibria, invariant region and critical wavenumbers.
    Equilibria { config: PathBuf },
    /// Integrate the full system, writing diagnostics and field snapshots.
    Simulate { config: PathBuf },
    /// Evaluate the infection-free series solution at the given times.
    Analytic {
        config: PathBuf,
        /// Comma-separated evaluation times (default: the config's t_end).
        #[arg(long = "t", value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Scan the dispersion relation around an equilibrium.
    Dispersion {
        config: PathBuf,
        #[arg(long = "eq", value_enum, default_value = "a1")]
        equilibrium: EqArg,
    },
    /// Run verification experiments and write verify.json.
    Verify {
        config: PathBuf,
        /// Overrides the config's verify.suite.
        #[arg(long)]
        suite: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EqArg {
    A1,
    A2,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Equilibria { .. } => "equilibria",
            Command::Simulate { .. } => "simulate",
            Command::Analytic { .. } => "analytic",
            Command::Dispersion { .. } => "dispersion",
            Command::Verify { .. } => "verify",
        }
    }

    fn config_path(&self) -> &PathBuf {
        match self {
            Command::Equilibria { config }
            | Command::Simulate { config }
            | Command::Analytic { config, .. }
            | Command::Dispersion { config, .. }
            | Command::Verify { config, .. } => config,
        }
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let cfg = RunConfig::load(command.config_path())?;
    let suite = match command {
        Command::Verify { suite: Some(s), .. } => s.parse::<Suite>().map_err(CliError::Config)?,
        _ => cfg.suite()?,
    };
    let mut out = OutputDir::open(&cfg.output.dir)?;
    let outcome = match command {
        Command::Equilibria { .. } => commands::equilibria(&cfg),
        Command::Simulate { .. } => commands::simulate(&cfg, &mut out),
        Command::Analytic { times, .. } => {
            let times = if times.is_empty() {
                vec![cfg.time.t_end]
            } else {
                times.clone()
            };
            commands::analytic(&cfg, &times, &mut out)
        }
        Command::Dispersion { equilibrium, .. } => {
            let kind = match equilibrium {
                EqArg::A1 => EquilibriumKind::A1,
                EqArg::A2 => EquilibriumKind::A2,
            };
            commands::dispersion(&cfg, kind, &mut out)
        }
        Command::Verify { .. } => commands::verify(&cfg, suite, &mut out),
    };
    out.finish(command.name(), &cfg, &outcome)?;
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
