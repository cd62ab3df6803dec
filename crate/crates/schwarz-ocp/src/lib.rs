//! Overlapping Schwarz temporal decomposition for long-horizon optimal
//! control.
//!
//! The crate is organized bottom-up:
//!
//! - [`traj`]: trajectory containers with first-class multipliers,
//! - [`lq`]: structured linear-quadratic solves (Riccati, dense KKT,
//!   convexification, sensitivity duals),
//! - [`ocp`]: the nonlinear problem interface and stagewise KKT residuals,
//! - [`nlp`]: the exact-Hessian SQP solver,
//! - [`schwarz`]: the overlapping temporal decomposition,
//! - [`sensitivity`]: directional derivatives and decay-of-sensitivity
//!   probes,
//! - [`problems`]: quadrotor tracking and thin-plate temperature control
//!   benchmarks,
//! - [`baselines`]: a consensus-ADMM decomposition for comparison.
//!
//! The numeric core (`traj`, `lq`) is generic over the scalar type; the
//! `*Of<T>` containers have `f64` aliases at the crate root.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod lq;
pub mod nlp;
pub mod ocp;
pub mod problems;
pub mod schwarz;
pub mod sensitivity;
pub mod traj;

pub use traj::Scalar;

/// `f64` trajectory.
pub type Trajectory = traj::TrajectoryOf<f64>;
/// `f64` subdomain trajectory.
pub type SubTrajectory = traj::SubTrajectoryOf<f64>;
/// `f64` boundary data.
pub type BoundaryData = traj::BoundaryDataOf<f64>;
/// `f64` terminal boundary block.
pub type TerminalData = traj::TerminalDataOf<f64>;
/// `f64` LQ problem.
pub type LqProblem = lq::LqProblemOf<f64>;
/// `f64` LQ stage.
pub type LqStage = lq::LqStageOf<f64>;
/// `f64` Riccati factors.
pub type RiccatiFactors = lq::RiccatiFactorsOf<f64>;
