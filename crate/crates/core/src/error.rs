use thiserror::Error;

/// Errors surfaced by the library.
///
/// Variants distinguish caller mistakes (dimension/config), violated
/// mathematical preconditions (gates, domains), and numerical breakdowns
/// (brackets, starvation, solver aborts) so the CLI can map them to distinct
/// exit codes.
#[derive(Debug, Error)]
pub enum CclError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid cone spec: {0}")]
    InvalidCone(String),

    #[error("transform gate violated: {0}")]
    TransformGate(String),

    #[error("projection requires a type-1 base with target_dim in [kappa+1, n-1]; {0}")]
    ProjectionUnavailable(String),

    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    #[error("interior sampler starved after {attempts} rejections")]
    SamplerStarvation { attempts: usize },

    #[error("no feasible sign-pattern sample found in {budget} tries (kappa = {kappa})")]
    InfeasibleSignPattern { budget: usize, kappa: usize },

    #[error("point outside operator domain (margin {margin:.3e})")]
    OutsideDomain { margin: f64 },

    #[error("eigenvalues exit the solve cone at node {node:?} (margin {margin:.3e})")]
    DomainExit { node: Vec<usize>, margin: f64 },

    #[error("ellipticity floor {floor:.3e} fell below {threshold:.1e}")]
    EllipticityFloor { floor: f64, threshold: f64 },

    #[error("damping reached the minimum step without an acceptable iterate")]
    DampingFloor,

    #[error("linear solver failed to reach tolerance: {0}")]
    LinearSolver(String),

    #[error("max iterations ({0}) exceeded")]
    MaxIterations(usize),

    #[error("continuation profile not monotone: {0}")]
    NonMonotoneContinuation(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid field spec: {0}")]
    InvalidField(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, CclError>;
