//! `ccl`: cone invariants, ellipticity certificates, curvature identity
//! checks, admissible-factor construction, and the grid/radial solvers, all
//! driven by JSON configs with reproducible artifact manifests.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccl_cli::commands::execute;
use ccl_cli::config::Command;

#[derive(Parser)]
#[command(name = "ccl", version, about = "Cone calculus command line harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (schema ccl/1).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Seed override; beats the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override; beats the config's tol.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Sub {
    /// Invariant bundles (kappa, varrho, type, theta) for a cone battery.
    ConeReport(Common),
    /// Sampled ellipticity certificates, a shift sweep, and ratio checks.
    Ellipticity(Common),
    /// Round-off identity residuals and a refinement order study.
    VerifyIdentities(Common),
    /// Search for an admissible conformal factor by height doubling.
    Construct(Common),
    /// Newton solve on a grid, or the radial continuation on the ball chart.
    Solve(Common),
    /// Run the whole battery under one manifest with a summary table.
    Suite(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match &cli.cmd {
        Sub::ConeReport(c) => (Command::ConeReport, c),
        Sub::Ellipticity(c) => (Command::Ellipticity, c),
        Sub::VerifyIdentities(c) => (Command::VerifyIdentities, c),
        Sub::Construct(c) => (Command::Construct, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Suite(c) => (Command::Suite, c),
    };
    match execute(cmd, &common.config, &common.out, common.seed, common.tol) {
        Ok((outcome, manifest)) => {
            eprintln!("{}: {}", cmd.name(), outcome.headline);
            eprintln!(
                "manifest {} ({} artifacts, {} ms)",
                manifest.content_hash,
                manifest.artifacts.len(),
                manifest.wall_time_ms
            );
            ExitCode::from(outcome.exit as u8)
        }
        Err(e) => {
            eprintln!("{}: error: {}", cmd.name(), e.message);
            ExitCode::from(e.exit as u8)
        }
    }
}
