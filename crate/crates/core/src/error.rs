use thiserror::Error;

/// Failures raised by the engine. Display strings start with a stable
/// kebab-case tag so callers and logs can match on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cell-intersects-boundary: {0}")]
    CellIntersectsBoundary(String),
    #[error("insufficient-interface-resolution: {0}")]
    InsufficientInterfaceResolution(String),
    #[error("non-conforming-tiling: domain/(eps*L) = {0} is not a positive integer")]
    NonConformingTiling(f64),
    #[error("invalid-geometry: {0}")]
    InvalidGeometry(String),
    #[error("mesh-generation: {0}")]
    MeshGeneration(String),
    #[error("singular-element: triangle {0} has non-positive area")]
    SingularElement(usize),
    #[error("solver-stagnation: {iterations} iterations, relative residual {residual:e}")]
    SolverStagnation { iterations: usize, residual: f64 },
    #[error("not-spd: non-positive curvature {0:e} met in conjugate gradients")]
    NotSpd(f64),
    #[error("singular-matrix: dense factorization failed")]
    SingularMatrix,
    #[error("no-history: voltage history is empty")]
    NoHistory,
    #[error("invalid-pore-density: {0:e}")]
    InvalidPoreDensity(f64),
    #[error("invalid-params: {0}")]
    InvalidParams(String),
    #[error("schur-failure: {0}")]
    SchurFailure(String),
    #[error("cell-problem-singular: {0}")]
    CellProblemSingular(String),
    #[error("noncoercive-effective-tensor: smallest eigenvalue {0:e}")]
    NoncoerciveEffectiveTensor(f64),
    #[error("blow-up-detected: |v| = {norm:e} exceeds bound {bound:e} at t = {time:e} s")]
    BlowUpDetected { time: f64, norm: f64, bound: f64 },
    #[error("invalid-input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
