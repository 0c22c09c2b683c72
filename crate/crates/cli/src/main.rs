use std::path::PathBuf;
use std::process::ExitCode;

use apll_cli::commands::{cmd_check, cmd_plotdata, cmd_run, describe_builtin, ScenarioSource};
use apll_cli::config_file::{config_to_toml, load_config};
use apll_cli::plot::FIGURES;
use apll_cli::{say, CliError};
use apll_core::engine::BUILTIN_NAMES;
use clap::{ArgGroup, Parser, Subcommand};

/// Adaptive grid synchronization for a converter on a weak grid.
///
/// Exit status: 0 success, 2 configuration or usage error, 3 divergence,
/// 4 infeasible operating point, 5 I/O error.
#[derive(Parser)]
#[command(name = "apll", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario, a scenario file, or repeat a manifest.
    #[command(group(ArgGroup::new("source").required(true).args(["scenario", "scenario_file", "manifest"])))]
    Run {
        /// Built-in scenario name (see list-scenarios).
        scenario: Option<String>,
        #[arg(long)]
        scenario_file: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Extract two-column plot data for a figure from trace CSV files.
    Plotdata {
        #[arg(short, long)]
        figure: String,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(short, long, default_value = "plots")]
        out: PathBuf,
    },
    /// Diagnostics of the nominal operating point.
    Check {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// List the figures known to plotdata.
    ListFigures,
    /// Print the resolved configuration as TOML.
    ShowConfig {
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, scenario_file, manifest, config, out } => {
            let source = match (scenario, scenario_file, manifest) {
                (Some(n), _, _) => ScenarioSource::Builtin(n),
                (_, Some(f), _) => ScenarioSource::File(f),
                (_, _, Some(m)) => ScenarioSource::Manifest(m),
                _ => unreachable!("clap enforces one source"),
            };
            cmd_run(config.as_deref(), &source, &out)?;
            say(&format!("wrote {}\n", out.display()));
        }
        Command::Plotdata { figure, traces, out } => {
            for f in cmd_plotdata(&traces, &figure, &out)? {
                say(&format!("{}\n", f.display()));
            }
        }
        Command::Check { config, out } => say(&cmd_check(config.as_deref(), out.as_deref())?),
        Command::ListScenarios => {
            for n in BUILTIN_NAMES {
                say(&format!("{n:<12} {}\n", describe_builtin(n)));
            }
        }
        Command::ListFigures => {
            for f in FIGURES {
                say(&format!("{:<12} {} [{}]\n", f.name, f.title, f.channels.join(", ")));
            }
        }
        Command::ShowConfig { config } => say(&config_to_toml(&load_config(config.as_deref())?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
