//! `scalesim`: run autoscaling experiments from scenario files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scalesim_core::{
    load_scenario, run_experiment, ControllerKind, Error, ExperimentOptions, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "scalesim",
    about = "Cluster elasticity simulator and autoscaler comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every controller of a scenario and write traces, audit logs and reports.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated controllers, e.g. default_hpa,proposed.
        #[arg(long, value_delimiter = ',')]
        controllers: Option<Vec<String>>,
        /// Base seed; repeats use seed, seed+1, ...
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repeats: Option<u32>,
        /// Suppress the comparison table on stdout.
        #[arg(long)]
        quiet: bool,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Print the version.
    Version,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn fail(err: &Error) -> ExitCode {
    if err.is_config() {
        eprintln!("error: {err}");
        ExitCode::from(EXIT_CONFIG)
    } else {
        if matches!(err, Error::Invariant(_)) {
            eprintln!("internal error: {err}");
        } else {
            eprintln!("error: {err}");
        }
        ExitCode::from(EXIT_RUNTIME)
    }
}

/// A scenario that cannot be read is bad input, whatever the cause.
fn load(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    load_scenario(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Version => {
            println!("scalesim {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => match load(&scenario) {
            Ok(s) => {
                println!(
                    "{}: ok ({} s horizon, {} controllers, {} repeats)",
                    s.name,
                    s.horizon,
                    s.controllers.len(),
                    s.repeats
                );
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run {
            scenario,
            out,
            controllers,
            seed,
            repeats,
            quiet,
        } => {
            let loaded = match load(&scenario) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let controllers = match controllers
                .map(|names| {
                    names
                        .iter()
                        .map(|n| n.trim().parse::<ControllerKind>())
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()
            {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let opts = ExperimentOptions {
                out_dir: out,
                controllers,
                seed,
                repeats,
            };
            match run_experiment(&loaded, &opts) {
                Ok(summary) => {
                    if !quiet {
                        match &summary.comparison {
                            Some(table) => print!("{}", table.to_markdown()),
                            None => {
                                for r in &summary.reports {
                                    println!(
                                        "{} seed {}: {} SLO episodes, {:.0} s, {:.2} node-h",
                                        r.controller,
                                        r.seed,
                                        r.slo_violation_count,
                                        r.slo_violation_duration,
                                        r.node_hours
                                    );
                                }
                            }
                        }
                        println!("results in {}", summary.scenario_dir.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
