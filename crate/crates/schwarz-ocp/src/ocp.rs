//! Nonlinear discrete-time optimal control problems.
//!
//! A problem is `min Σ_{k<N} g_k(x_k, u_k) + g_N(x_N)` subject to
//! `x_{k+1} = f_k(x_k, u_k)` and `x_0 = x̄_0`, described through the
//! [`OcpModel`] callback trait. Stage indices passed to the callbacks are
//! absolute, so a model can be shared between the full problem and
//! subdomain windows.
//!
//! Models may also expose derivatives with respect to an external data
//! vector `d` (reference signals, parameters); these default to zero and
//! are only needed for sensitivity probes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::EvalError;
use crate::traj::TrajectoryOf;

pub type Trajectory = TrajectoryOf<f64>;

/// Second-derivative blocks of the stage Lagrangian
/// `g_k(x,u) - λ_k^T f_k(x,u)` with respect to `(x, u)`.
#[derive(Debug, Clone)]
pub struct HessBlock {
    /// `∂²/∂x²`, `nx × nx`.
    pub q: DMatrix<f64>,
    /// `∂²/∂u∂x`, `nu × nx`.
    pub s: DMatrix<f64>,
    /// `∂²/∂u²`, `nu × nu`.
    pub r: DMatrix<f64>,
}

/// Callback interface for a nonlinear OCP.
///
/// All stage indices are absolute positions on the full horizon. Methods
/// returning `Result` may fail with [`EvalError`] outside the model's
/// admissible region.
pub trait OcpModel: Send + Sync {
    fn nx(&self) -> usize;
    fn nu(&self) -> usize;

    /// Stage cost `g_k(x, u)`, `k < N`.
    fn cost(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64;

    /// Gradient `(∇_x g_k, ∇_u g_k)`.
    fn cost_grad(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>)
        -> (DVector<f64>, DVector<f64>);

    /// Dynamics `f_k(x, u)`.
    fn dynamics(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>)
        -> Result<DVector<f64>, EvalError>;

    /// Jacobians `(A_k, B_k) = (∂f_k/∂x, ∂f_k/∂u)`.
    fn dynamics_jac(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError>;

    /// Hessian blocks of `g_k(x,u) - λ^T f_k(x,u)`.
    fn lagrangian_hessian(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<HessBlock, EvalError>;

    /// Terminal cost `g_N(x)`.
    fn terminal_cost(&self, x: &DVector<f64>) -> f64;

    /// Terminal gradient `∇ g_N(x)`.
    fn terminal_grad(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Terminal Hessian `∇² g_N(x)`.
    fn terminal_hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Dimension of the external data vector per stage (0 when the model has
    /// no data dependence).
    fn data_dim(&self) -> usize {
        0
    }

    /// `C_k = ∂f_k/∂d`, `nx × n_d`.
    fn dynamics_data_jac(
        &self,
        _k: usize,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Result<DMatrix<f64>, EvalError> {
        Ok(DMatrix::zeros(self.nx(), self.data_dim()))
    }

    /// Cross derivatives `(∂²L_k/∂d∂x, ∂²L_k/∂d∂u)`, each `n_d × (nx|nu)`.
    fn cost_data_cross(
        &self,
        _k: usize,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _lambda: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        Ok((
            DMatrix::zeros(self.data_dim(), self.nx()),
            DMatrix::zeros(self.data_dim(), self.nu()),
        ))
    }

    /// Terminal cross derivative `∂²g_N/∂d∂x`, `n_d × nx`.
    fn terminal_data_cross(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.data_dim(), self.nx())
    }
}

/// An LQ problem exposed through the nonlinear interface. Useful for feeding
/// LQ instances to the SQP and decomposition layers; the coupling blocks and
/// free-initial flag of the wrapped problem are ignored.
pub struct LqModel {
    pub prob: crate::lq::LqProblemOf<f64>,
}

impl OcpModel for LqModel {
    fn nx(&self) -> usize {
        self.prob.nx
    }

    fn nu(&self) -> usize {
        self.prob.nu
    }

    fn cost(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let st = &self.prob.stages[k];
        (x.transpose() * &st.q * x)[(0, 0)]
            + 2.0 * (u.transpose() * &st.s * x)[(0, 0)]
            + (u.transpose() * &st.r * u)[(0, 0)]
            + st.r_lin.dot(x)
            + st.s_lin.dot(u)
    }

    fn cost_grad(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let st = &self.prob.stages[k];
        (
            &st.q * x * 2.0 + st.s.transpose() * u * 2.0 + &st.r_lin,
            &st.s * x * 2.0 + &st.r * u * 2.0 + &st.s_lin,
        )
    }

    fn dynamics(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        let st = &self.prob.stages[k];
        Ok(&st.a * x + &st.b * u + &st.v)
    }

    fn dynamics_jac(
        &self,
        k: usize,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        let st = &self.prob.stages[k];
        Ok((st.a.clone(), st.b.clone()))
    }

    fn lagrangian_hessian(
        &self,
        k: usize,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _lambda: &DVector<f64>,
    ) -> Result<HessBlock, EvalError> {
        let st = &self.prob.stages[k];
        Ok(HessBlock {
            q: &st.q * 2.0,
            s: &st.s * 2.0,
            r: &st.r * 2.0,
        })
    }

    fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.prob.qn * x)[(0, 0)] + self.prob.rn_lin.dot(x)
    }

    fn terminal_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.prob.qn * x * 2.0 + &self.prob.rn_lin
    }

    fn terminal_hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        &self.prob.qn * 2.0
    }
}

impl NlpOcp {
    /// Wraps an LQ problem as a nonlinear OCP.
    pub fn from_lq(prob: crate::lq::LqProblemOf<f64>) -> NlpOcp {
        let n = prob.n;
        let x0 = prob.x0.clone();
        NlpOcp {
            model: Arc::new(LqModel { prob }),
            n,
            x0,
            initial: InitialCondition::Fixed,
        }
    }
}

/// How the initial state enters the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    /// `x_0 = x̄_0` enforced with multiplier `λ_{-1}`.
    Fixed,
    /// `x_0` is a free variable (consensus subproblems); `λ_{-1} = 0`.
    Free,
}

/// A nonlinear OCP instance: a model, a horizon window, and an initial state.
#[derive(Clone)]
pub struct NlpOcp {
    pub model: Arc<dyn OcpModel>,
    pub n: usize,
    pub x0: DVector<f64>,
    pub initial: InitialCondition,
}

/// Stagewise KKT residual: `stat` is the largest stationarity block norm,
/// `feas` the largest constraint violation block norm.
#[derive(Debug, Clone, Copy)]
pub struct KktResidual {
    pub stat: f64,
    pub feas: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stat.max(self.feas)
    }
}

impl NlpOcp {
    pub fn nx(&self) -> usize {
        self.model.nx()
    }

    pub fn nu(&self) -> usize {
        self.model.nu()
    }

    /// Constant initial guess: every state at `x̄_0`, controls and
    /// multipliers zero. Satisfies the decomposition contract that a start
    /// trajectory's `x_0` matches the problem's initial state.
    pub fn constant_start(&self) -> Trajectory {
        let mut t = Trajectory::zeros(self.n, self.nx(), self.nu());
        for x in t.x.iter_mut() {
            *x = self.x0.clone();
        }
        t
    }

    /// Total objective along a trajectory.
    pub fn objective(&self, t: &Trajectory) -> f64 {
        let mut total = self.model.terminal_cost(&t.x[self.n]);
        for k in 0..self.n {
            total += self.model.cost(k, &t.x[k], &t.u[k]);
        }
        total
    }

    /// Evaluates the stagewise KKT residual at `t`.
    ///
    /// Stationarity blocks: `∇_x g_k + λ_{k-1} - A_k^T λ_k` and
    /// `∇_u g_k - B_k^T λ_k` for `k < N`, plus `∇g_N + λ_{N-1}`. Feasibility
    /// blocks: `x_{k+1} - f_k(x_k, u_k)` and, for a fixed initial condition,
    /// `x_0 - x̄_0`. For a free initial state the `λ_{-1}` slot must be zero
    /// and the stage-0 stationarity drops that term.
    pub fn kkt_residual(&self, t: &Trajectory) -> Result<KktResidual, EvalError> {
        let n = self.n;
        let mut stat: f64 = 0.0;
        let mut feas: f64 = 0.0;

        if self.initial == InitialCondition::Fixed {
            feas = feas.max((&t.x[0] - &self.x0).norm());
        }
        for k in 0..n {
            let (gx, gu) = self.model.cost_grad(k, &t.x[k], &t.u[k]);
            let (a, b) = self.model.dynamics_jac(k, &t.x[k], &t.u[k])?;
            let lam = t.lambda_at(k as isize);
            let mut rx = gx - a.transpose() * lam;
            if k > 0 || self.initial == InitialCondition::Fixed {
                rx += t.lambda_at(k as isize - 1);
            }
            let ru = gu - b.transpose() * lam;
            stat = stat.max(rx.norm()).max(ru.norm());

            let fx = self.model.dynamics(k, &t.x[k], &t.u[k])?;
            feas = feas.max((&t.x[k + 1] - fx).norm());
        }
        let rterm = self.model.terminal_grad(&t.x[n]) + t.lambda_at(n as isize - 1);
        stat = stat.max(rterm.norm());

        Ok(KktResidual { stat, feas })
    }
}
