use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use olpi_cli::config::load_config;
use olpi_cli::run::{demo_fig1, run_experiment, RunOptions, RunSummary};
use olpi_cli::verify::{render_table, run_checks, Status, Suite, VerifyOptions};
use olpi_cli::{CliError, Result};

/// On-line policy iteration experiments.
#[derive(Parser)]
#[command(name = "olpi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Record generator inconsistencies instead of aborting.
        #[arg(long)]
        allow_inconsistent: bool,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the seeded oracle and invariant checks.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Wall-clock budget in seconds; checks past it are skipped.
        #[arg(long, default_value_t = 300.0)]
        budget: f64,
        /// Use a deliberately inconsistent generator in the consistency check.
        #[arg(long)]
        inject_inconsistent: bool,
    },
    /// Bundled demonstrations.
    Demo {
        #[command(subcommand)]
        which: Demo,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// The two-stage graph where an inconsistent generator breaks
    /// cost improvement.
    Fig1 {
        #[arg(long)]
        allow_inconsistent: bool,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn print_summary(label: &str, s: &RunSummary) {
    println!("{label}: {}", s.dir.display());
    println!("  costs: {:?}", s.costs);
    if let Some(o) = s.optimum {
        println!("  optimum: {o}");
    }
    if let Some(l) = s.converged_at {
        println!("  fixed point at iteration {l}");
    }
    println!("  monotonicity: {}", if s.monotone { "monotone" } else { "violated" });
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            allow_inconsistent,
            output_dir,
        } => {
            let loaded = load_config(&config)?;
            let s = run_experiment(
                &loaded,
                &RunOptions {
                    allow_inconsistent,
                    output_dir,
                },
            )?;
            print_summary("run", &s);
            Ok(())
        }
        Command::Verify {
            suite,
            budget,
            inject_inconsistent,
        } => {
            if !(budget >= 0.0) || !budget.is_finite() {
                return Err(CliError::Config("--budget must be a nonnegative number".into()));
            }
            let results = run_checks(
                suite,
                &VerifyOptions {
                    budget: Some(Duration::from_secs_f64(budget)),
                    inject_inconsistent,
                },
            );
            print!("{}", render_table(&results));
            let bad = results.iter().filter(|r| r.status != Status::Pass).count();
            println!("{}/{} checks passed", results.len() - bad, results.len());
            if bad > 0 {
                return Err(CliError::Verification(bad));
            }
            Ok(())
        }
        Command::Demo {
            which:
                Demo::Fig1 {
                    allow_inconsistent,
                    output_dir,
                },
        } => {
            let (good, bad) = demo_fig1(&RunOptions {
                allow_inconsistent,
                output_dir,
            })?;
            print_summary("consistent generator", &good);
            print_summary("inconsistent generator", &bad?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
