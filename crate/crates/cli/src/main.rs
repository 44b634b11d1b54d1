use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dqm_cli::commands::{self, RunOptions};
use dqm_cli::output::num;
use dqm_cli::CliError;

/// Dissipative quantum dynamics: validate, run, compare and sweep scenarios.
#[derive(Debug, Parser)]
#[command(name = "dqm", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "DQM_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Record every N-th accepted step (overrides the scenario).
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Reserved; the dynamics are deterministic and ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Check a scenario file and print diagnostics.
    Validate { scenario: PathBuf },
    /// Integrate a scenario; writes trajectory.csv and summary.json.
    Run { scenario: PathBuf },
    /// Integrate the nonlinear and linearized flows and report differences.
    Compare { scenario: PathBuf },
    /// Run every point of a parameter grid.
    Sweep { spec: PathBuf },
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        out: cli.out,
        stride: cli.stride,
        quiet: cli.quiet,
    };
    let say = |msg: String| {
        if !opts.quiet {
            println!("{msg}");
        }
    };
    match cli.verb {
        Verb::Validate { scenario } => match commands::validate(&scenario) {
            Ok(d) if d.is_empty() => {
                say(format!("{}: ok", scenario.display()));
                ExitCode::SUCCESS
            }
            Ok(d) => report(&CliError::Validation(d)),
            Err(e) => report(&e),
        },
        Verb::Run { scenario } => match commands::run(&scenario, &opts) {
            Ok(s) => {
                let cons = s.conservation.as_ref();
                say(format!(
                    "{}: {} records in {:.2}s, max relative energy drift {}, min eigenvalue {}",
                    s.scenario,
                    s.records,
                    s.elapsed_seconds,
                    cons.map_or("n/a".into(), |c| num(c.max_rel_energy_drift)),
                    cons.map_or("n/a".into(), |c| num(c.min_eigenvalue)),
                ));
                if let Some(d) = s.final_state.as_ref().and_then(|f| f.trace_distance_to_gibbs) {
                    say(format!("trace distance to Gibbs at t_end: {}", num(d)));
                }
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        },
        Verb::Compare { scenario } => match commands::compare(&scenario, &opts) {
            Ok(c) => {
                say(format!(
                    "{}: {}",
                    c.scenario,
                    if c.within_tolerance {
                        "all differences within tolerance"
                    } else {
                        "nonlinear and linearized dynamics differ"
                    }
                ));
                say(format!("report written to {}", opts.out.join("report.txt").display()));
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        },
        Verb::Sweep { spec } => match commands::sweep(&spec, &opts) {
            Ok(o) => {
                say(format!(
                    "{} points, {} failed; summary in {}",
                    o.points.len(),
                    o.failures(),
                    opts.out.join("sweep_summary.csv").display()
                ));
                for p in o.points.iter().filter(|p| !p.succeeded()) {
                    eprintln!("point_{:03}: {}: {}", p.index, p.status, p.error.as_deref().unwrap_or(""));
                }
                ExitCode::from(o.exit_code() as u8)
            }
            Err(e) => report(&e),
        },
    }
}
