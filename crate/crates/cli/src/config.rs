//! Config file loading and the typed payloads, one per subcommand.
//!
//! Every config is a single JSON object with the envelope keys `schema`
//! (must be `ccl/1`), optional `command` (must match the subcommand when
//! present), optional `seed` and `tol`, plus command-specific keys. Unknown
//! keys are rejected so typos surface as config errors instead of silently
//! reverting to defaults.

use std::fs;
use std::path::{Path, PathBuf};

use ccl_core::solver::ProblemSpec;
use ccl_core::{ConeSpec, FieldSpec, Manifold, SymmetricFunctionSpec};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::battery::{builtin_battery, validate_battery, NamedCone};
use crate::manifest::sha256_hex;
use crate::{RunError, RunResult, SCHEMA};

pub const DEFAULT_SEED: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    ConeReport,
    Ellipticity,
    VerifyIdentities,
    Construct,
    Solve,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ConeReport => "cone-report",
            Command::Ellipticity => "ellipticity",
            Command::VerifyIdentities => "verify-identities",
            Command::Construct => "construct",
            Command::Solve => "solve",
            Command::Suite => "suite",
        }
    }
}

/// A parsed config plus the resolved run parameters.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub value: serde_json::Value,
    pub config_sha256: String,
    pub seed: u64,
    /// Command-wide tolerance override (`--tol` beats the config key).
    pub tol: Option<f64>,
}

#[derive(Deserialize)]
struct Envelope {
    schema: String,
    #[serde(default)]
    command: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    tol: Option<f64>,
}

pub fn load(
    path: &Path,
    expected: Command,
    seed_override: Option<u64>,
    tol_override: Option<f64>,
) -> RunResult<Loaded> {
    let bytes = fs::read(path)
        .map_err(|e| RunError::config(format!("cannot read config {}: {e}", path.display())))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(RunError::config(format!("config {} is empty", path.display())));
    }
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| RunError::config(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !value.is_object() {
        return Err(RunError::config("config root must be a JSON object"));
    }
    let env: Envelope = serde_json::from_value(value.clone())
        .map_err(|e| RunError::config(format!("bad config envelope: {e}")))?;
    if env.schema != SCHEMA {
        return Err(RunError::config(format!(
            "unsupported schema {:?}, expected {SCHEMA:?}",
            env.schema
        )));
    }
    if let Some(cmd) = &env.command {
        if cmd != expected.name() {
            return Err(RunError::config(format!(
                "config is for command {cmd:?} but {:?} was invoked",
                expected.name()
            )));
        }
    }
    Ok(Loaded {
        value,
        config_sha256: sha256_hex(&bytes),
        seed: seed_override.or(env.seed).unwrap_or(DEFAULT_SEED),
        tol: tol_override.or(env.tol),
    })
}

/// In-process entry for callers that build configs as values (the suite, the
/// integration tests). The canonical JSON bytes are hashed the same way a
/// file would be.
pub fn load_value(
    value: serde_json::Value,
    expected: Command,
    seed_override: Option<u64>,
    tol_override: Option<f64>,
) -> RunResult<Loaded> {
    let env: Envelope = serde_json::from_value(value.clone())
        .map_err(|e| RunError::config(format!("bad config envelope: {e}")))?;
    if env.schema != SCHEMA {
        return Err(RunError::config(format!(
            "unsupported schema {:?}, expected {SCHEMA:?}",
            env.schema
        )));
    }
    if let Some(cmd) = &env.command {
        if cmd != expected.name() {
            return Err(RunError::config(format!(
                "config is for command {cmd:?} but {:?} was invoked",
                expected.name()
            )));
        }
    }
    let bytes = serde_json::to_vec(&value)?;
    Ok(Loaded {
        value,
        config_sha256: sha256_hex(&bytes),
        seed: seed_override.or(env.seed).unwrap_or(DEFAULT_SEED),
        tol: tol_override.or(env.tol),
    })
}

pub fn decode<T: DeserializeOwned>(loaded: &Loaded) -> RunResult<T> {
    serde_json::from_value(loaded.value.clone())
        .map_err(|e| RunError::config(format!("bad config: {e}")))
}

fn default_theta_budget() -> usize {
    6_000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaCfg {
    #[serde(default = "default_theta_budget")]
    pub budget: usize,
}

impl Default for ThetaCfg {
    fn default() -> Self {
        ThetaCfg { budget: default_theta_budget() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum BatteryCfg {
    Keyword(String),
    File { file: PathBuf },
    Inline(Vec<NamedCone>),
}

impl Default for BatteryCfg {
    fn default() -> Self {
        BatteryCfg::Keyword("builtin".to_string())
    }
}

pub fn resolve_battery(cfg: &BatteryCfg) -> RunResult<Vec<NamedCone>> {
    let items = match cfg {
        BatteryCfg::Keyword(s) if s == "builtin" => builtin_battery(),
        BatteryCfg::Keyword(s) => {
            return Err(RunError::config(format!(
                "unknown battery keyword {s:?}; use \"builtin\", {{\"file\": ...}}, or an inline list"
            )))
        }
        BatteryCfg::File { file } => {
            let bytes = fs::read(file).map_err(|e| {
                RunError::config(format!("cannot read battery {}: {e}", file.display()))
            })?;
            if bytes.iter().all(|b| b.is_ascii_whitespace()) {
                return Err(RunError::config(format!(
                    "battery file {} is empty",
                    file.display()
                )));
            }
            serde_json::from_slice::<Vec<NamedCone>>(&bytes).map_err(|e| {
                RunError::config(format!("battery file {}: {e}", file.display()))
            })?
        }
        BatteryCfg::Inline(v) => v.clone(),
    };
    validate_battery(&items)?;
    Ok(items)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeReportCfg {
    pub schema: String,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub battery: BatteryCfg,
    #[serde(default)]
    pub theta: ThetaCfg,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticityItem {
    pub name: String,
    pub f: SymmetricFunctionSpec,
    /// When set, certify the transformed operator at this shift instead of
    /// the partial certificate for the bare function.
    #[serde(default)]
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCfg {
    pub f: SymmetricFunctionSpec,
    pub rhos: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticityCfg {
    pub schema: String,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    /// None selects the builtin roster of sigma_k^{1/k} certificates.
    #[serde(default)]
    pub functions: Option<Vec<EllipticityItem>>,
    #[serde(default)]
    pub sweep: Option<SweepCfg>,
    #[serde(default = "default_true")]
    pub gradient_ratio_check: bool,
    #[serde(default)]
    pub theta: ThetaCfg,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightsCfg {
    pub a: FieldSpec,
    pub b: FieldSpec,
    pub exp_height: FieldSpec,
    pub exp_scale: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderStudyCfg {
    pub phi: FieldSpec,
    pub grids: Vec<usize>,
    pub tau: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesCfg {
    pub schema: String,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub manifold: Option<Manifold>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub heights: Option<HeightsCfg>,
    #[serde(default)]
    pub order_study: Option<OrderStudyCfg>,
}

fn default_tau() -> f64 {
    3.0
}

fn default_alpha() -> f64 {
    1.0
}

fn default_trials() -> usize {
    256
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructCfg {
    pub schema: String,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
    pub manifold: Manifold,
    pub cone: ConeSpec,
    pub tau: f64,
    pub alpha: f64,
    pub height: FieldSpec,
    #[serde(default = "default_n_max")]
    pub n_max: f64,
}

fn default_n_max() -> f64 {
    1024.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaRefCfg {
    Value { value: f64 },
    Certified { budget: usize },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitCfg {
    Zero,
    Field { spec: FieldSpec },
    /// Manufactured target plus an offset field; config error when the
    /// density is not manufactured.
    TargetOffset { spec: FieldSpec },
    GridFile { path: PathBuf },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonCfg {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub lin_tol: Option<f64>,
    #[serde(default)]
    pub lin_max: Option<usize>,
    #[serde(default)]
    pub theta_reference: Option<ThetaRefCfg>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialCfg {
    #[serde(default)]
    pub mesh_ratio: Option<f64>,
    #[serde(default)]
    pub stages: Option<Vec<usize>>,
    #[serde(default)]
    pub prefactor: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveCfg {
    pub schema: String,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub newton: NewtonCfg,
    #[serde(default)]
    pub init: Option<InitCfg>,
    #[serde(default)]
    pub radial: Option<RadialCfg>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteCfg {
    pub schema: String,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default = "default_profile")]
    pub profile: String,
}

fn default_profile() -> String {
    "full".to_string()
}
