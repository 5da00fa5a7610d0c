//! Subcommand implementations and the shared dispatcher.

pub mod cone_report;
pub mod construct;
pub mod ellipticity;
pub mod identities;
pub mod solve;
pub mod suite;

use std::path::Path;
use std::time::Instant;

use crate::config::{self, Command, Loaded};
use crate::manifest::{Manifest, Sink};
use crate::{pool, CommandOutcome, RunResult};

/// Run one command against a nested or top-level sink. Manifest writing is
/// the caller's job; suite items share one parent manifest.
pub fn dispatch(
    cmd: Command,
    loaded: &Loaded,
    sink: &mut Sink,
    threads: usize,
) -> RunResult<CommandOutcome> {
    match cmd {
        Command::ConeReport => cone_report::run(loaded, sink, threads),
        Command::Ellipticity => ellipticity::run(loaded, sink, threads),
        Command::VerifyIdentities => identities::run(loaded, sink, threads),
        Command::Construct => construct::run(loaded, sink),
        Command::Solve => solve::run(loaded, sink),
        Command::Suite => suite::run(loaded, sink, threads),
    }
}

/// File-config entry used by the binary: load, dispatch, write the manifest.
pub fn execute(
    cmd: Command,
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
    tol_override: Option<f64>,
) -> RunResult<(CommandOutcome, Manifest)> {
    let started = Instant::now();
    let loaded = config::load(config_path, cmd, seed_override, tol_override)?;
    run_loaded(cmd, &loaded, out, started)
}

/// Value-config entry used in process by tests.
pub fn execute_value(
    cmd: Command,
    value: serde_json::Value,
    out: &Path,
    seed_override: Option<u64>,
    tol_override: Option<f64>,
) -> RunResult<(CommandOutcome, Manifest)> {
    let started = Instant::now();
    let loaded = config::load_value(value, cmd, seed_override, tol_override)?;
    run_loaded(cmd, &loaded, out, started)
}

fn run_loaded(
    cmd: Command,
    loaded: &Loaded,
    out: &Path,
    started: Instant,
) -> RunResult<(CommandOutcome, Manifest)> {
    let mut sink = Sink::new(out)?;
    let outcome = dispatch(cmd, loaded, &mut sink, pool::thread_budget())?;
    let manifest = sink.finish(
        cmd.name(),
        loaded.seed,
        &loaded.config_sha256,
        started.elapsed().as_millis(),
    )?;
    Ok((outcome, manifest))
}

/// Envelope wrapped around every JSON artifact.
#[derive(serde::Serialize)]
pub struct Artifact<'a, T> {
    pub schema: &'a str,
    pub command: &'a str,
    pub seed: u64,
    pub payload: T,
}

impl<'a, T> Artifact<'a, T> {
    pub fn new(command: &'a str, seed: u64, payload: T) -> Self {
        Artifact { schema: crate::SCHEMA, command, seed, payload }
    }
}

/// Stable per-item seed, independent of thread schedule.
pub fn item_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub use pool::map_indexed;
