//! Error types shared across the solver stack.

use thiserror::Error;

/// Shape/consistency violations in trajectory and problem containers.
#[derive(Debug, Error)]
pub enum StructuralError {
    #[error("trajectory with horizon {n} has {x} state, {u} control, {lambda} dual blocks")]
    BlockCount { n: usize, x: usize, u: usize, lambda: usize },
    #[error("{block} block at stage {stage} has length {got}, expected {expected}")]
    StageDim { block: &'static str, stage: isize, expected: usize, got: usize },
    #[error("partition and subdomain data disagree: {0}")]
    PartitionMismatch(String),
}

/// Failures of the structured linear-quadratic solver.
#[derive(Debug, Error)]
pub enum LqError {
    /// `W_k = R_k + B_k^T K_{k+1} B_k` is not positive definite: the
    /// reduced-Hessian assumption fails at this data.
    #[error("W_{0} is not positive definite")]
    IndefiniteW(usize),
    /// `R̃_k` in the convexification backward loop is singular, i.e. β lies
    /// outside `(0, γ_H)`.
    #[error("convexification breakdown at stage {0}: R̃ not positive definite")]
    ConvexifyBreakdown(usize),
    #[error("full KKT matrix is singular")]
    SingularKkt,
    /// Free-initial-state solve with an indefinite value-function Hessian
    /// at stage 0.
    #[error("K_0 is not positive definite; free initial state has no minimizer")]
    IndefiniteInitial,
    #[error(transparent)]
    Structural(#[from] StructuralError),
}

/// Failure raised by problem callbacks (dynamics/derivative evaluation).
#[derive(Debug, Error)]
pub enum EvalError {
    /// Quadrotor attitude kinematics evaluated at |β| = π/2.
    #[error("trigonometric singularity at stage {stage}: cos(beta) = 0")]
    TrigSingularity { stage: usize },
    #[error("evaluation failed at stage {stage}: {reason}")]
    Failed { stage: usize, reason: String },
}

/// SQP solver failures.
#[derive(Debug, Error)]
pub enum SqpError {
    #[error("maximum number of SQP iterations reached")]
    MaxIterations,
    #[error("line search step fell below the minimum step length")]
    LineSearchFailure,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lq(#[from] LqError),
    #[error(transparent)]
    Structural(#[from] StructuralError),
}

/// Outer decomposition loop failures.
#[derive(Debug, Error)]
pub enum SchwarzError {
    #[error("invalid partition: T = {t} subdomains for horizon N = {n}")]
    InvalidPartition { t: usize, n: usize },
    /// Seam residuals require τ ≥ 1 when T > 1.
    #[error("overlap τ = 0 with T > 1: seam residuals are undefined")]
    InvalidOverlap,
    #[error("boundary data for subdomain {0} is missing its terminal block")]
    MissingBoundary(usize),
    #[error("subproblem {i} failed at outer iteration {iter}: {source}")]
    SubproblemFailure { i: usize, iter: usize, source: SqpError },
    /// Carries the last iterate and the full convergence record.
    #[error("maximum number of outer iterations reached")]
    MaxOuterIterations(Box<crate::schwarz::SchwarzOutput>),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Structural(#[from] StructuralError),
}

/// Sensitivity-probe failures.
#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("base point is not a KKT point: residual {0:.3e} exceeds tolerance")]
    NotAtKkt(f64),
    #[error("perturbed solve failed ({descriptor}): {source}")]
    PerturbedSolve { descriptor: String, source: SqpError },
    #[error(transparent)]
    Eval(#[from] EvalError),
}
