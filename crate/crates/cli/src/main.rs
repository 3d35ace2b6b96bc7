//! `psc-cyl`: run one scenario file and write its report bundle.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use commands::Overrides;

#[derive(Parser, Debug)]
#[command(name = "psc-cyl", version, about = "Scalar curvature checks for stretched cylinders, torpedoes and collars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scalar curvature of the scenario manifold over a grid.
    Curvature(Args),
    /// Closed-form cylinder curvature against the brute-force oracle.
    CylinderCheck(Args),
    /// Minimal psc stretch of the scenario path, with a negativity witness.
    Stretch(Args),
    /// Torpedo profile certification.
    Torpedo(Args),
    /// Collar retraction, boundary restriction and homotopy endpoints.
    Retract(Args),
    /// Every invariant that applies to the scenario.
    Verify(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Points per grid axis; overrides the scenario.
    #[arg(long)]
    grid: Option<usize>,
    /// Certification tolerance; overrides the scenario.
    #[arg(long)]
    tol: Option<f64>,
}

impl Command {
    fn split(&self) -> (&'static str, &Args) {
        match self {
            Command::Curvature(a) => ("curvature", a),
            Command::CylinderCheck(a) => ("cylinder-check", a),
            Command::Stretch(a) => ("stretch", a),
            Command::Torpedo(a) => ("torpedo", a),
            Command::Retract(a) => ("retract", a),
            Command::Verify(a) => ("verify", a),
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("PSC_CYL_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().with_context(|| format!("PSC_CYL_THREADS={value:?} is not a count"))?;
    if n == 0 {
        anyhow::bail!("PSC_CYL_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    configure_threads()?;
    let (name, args) = cli.command.split();
    if args.grid == Some(0) {
        anyhow::bail!("--grid must be positive");
    }
    let scenario = config::load(&args.config)?;
    let overrides = Overrides { grid: args.grid, tol: args.tol };
    let report = commands::run(name, &scenario, overrides)?;
    let summary = report.write(&args.out, &scenario.name, name)?;
    for check in summary.checks.iter().filter(|c| !c.passed) {
        eprintln!("failed: {} ({} {} {})", check.id, check.value, check.relation, check.bound);
    }
    println!(
        "{name} {:?}: {} ({} of {} checks pass) -> {}",
        scenario.name,
        if summary.passed { "PASS" } else { "FAIL" },
        summary.checks.iter().filter(|c| c.passed).count(),
        summary.checks.len(),
        args.out.display()
    );
    Ok(summary.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
