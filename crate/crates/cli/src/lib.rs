//! Library half of the `ccl` binary: config parsing, the builtin cone
//! battery, artifact/manifest plumbing, and one module per subcommand.
//! The binary is a thin dispatcher so integration tests can drive the same
//! code paths in process.

pub mod battery;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod pool;

use std::fmt;

use ccl_core::CclError;

pub const SCHEMA: &str = "ccl/1";

/// Every requested check passed at its stated tolerance.
pub const EXIT_OK: i32 = 0;
/// Malformed or inconsistent configuration, unusable inputs.
pub const EXIT_CONFIG: i32 = 2;
/// A hypothesis the run was asked to certify does not hold (for example a
/// construction that ends without an admissible factor). The artifacts
/// describe the finding.
pub const EXIT_FINDING: i32 = 3;
/// A numerical invariant broke: ellipticity floor, residual tolerance,
/// solver divergence, identity out of tolerance.
pub const EXIT_VIOLATION: i32 = 4;

/// Error carrying the process exit class alongside the message.
#[derive(Debug)]
pub struct RunError {
    pub exit: i32,
    pub message: String,
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunError { exit: EXIT_CONFIG, message: msg.into() }
    }

    pub fn finding(msg: impl Into<String>) -> Self {
        RunError { exit: EXIT_FINDING, message: msg.into() }
    }

    pub fn violation(msg: impl Into<String>) -> Self {
        RunError { exit: EXIT_VIOLATION, message: msg.into() }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for RunError {}

impl From<CclError> for RunError {
    fn from(e: CclError) -> Self {
        let exit = match &e {
            CclError::DimensionMismatch { .. }
            | CclError::InvalidCone(_)
            | CclError::TransformGate(_)
            | CclError::ProjectionUnavailable(_)
            | CclError::InvalidProblem(_)
            | CclError::GridTooCoarse(_)
            | CclError::InvalidField(_)
            | CclError::Io(_)
            | CclError::Serde(_) => EXIT_CONFIG,
            CclError::OutsideDomain { .. } | CclError::DomainExit { .. } => EXIT_FINDING,
            CclError::BracketFailure(_)
            | CclError::SamplerStarvation { .. }
            | CclError::InfeasibleSignPattern { .. }
            | CclError::EllipticityFloor { .. }
            | CclError::DampingFloor
            | CclError::LinearSolver(_)
            | CclError::MaxIterations(_)
            | CclError::NonMonotoneContinuation(_)
            | CclError::InvariantViolation(_) => EXIT_VIOLATION,
        };
        RunError { exit, message: e.to_string() }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::config(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::config(format!("json error: {e}"))
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::config(format!("csv error: {e}"))
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// What a finished command hands back to the dispatcher: the exit class it
/// earned and a one line summary for stderr.
#[derive(Debug)]
pub struct CommandOutcome {
    pub exit: i32,
    pub headline: String,
}

impl CommandOutcome {
    pub fn ok(headline: impl Into<String>) -> Self {
        CommandOutcome { exit: EXIT_OK, headline: headline.into() }
    }
}
