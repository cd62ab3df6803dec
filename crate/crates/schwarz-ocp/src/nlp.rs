//! Equality-constrained SQP with exact Hessians and structured step solves.
//!
//! Each iteration linearizes the KKT system at the current primal-dual pair
//! and solves the resulting linear-quadratic problem by Riccati
//! factorization; the LQ multipliers are the full new multipliers, so the
//! step is an exact Newton step on the KKT conditions. Globalization uses an
//! ℓ1 merit function with Armijo backtracking; indefinite subproblems are
//! handled by increasing Levenberg regularization of the Hessian blocks.

use nalgebra::DVector;

use crate::error::{EvalError, LqError, SqpError};
use crate::lq::{lq_solve, LqProblemOf};
use crate::ocp::{InitialCondition, KktResidual, NlpOcp};
use crate::traj::TrajectoryOf;

pub type Trajectory = TrajectoryOf<f64>;

#[derive(Debug, Clone)]
pub struct SqpOptions {
    /// Convergence tolerance on the stagewise KKT residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor for backtracking.
    pub backtrack: f64,
    /// Line search fails below this step length.
    pub min_step: f64,
    /// Initial Levenberg shift when the subproblem is indefinite.
    pub reg_init: f64,
    /// Multiplier applied to the shift after each failed factorization.
    pub reg_growth: f64,
    /// Safety margin added to the multiplier bound in the merit penalty.
    pub penalty_margin: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 100,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 1e-12,
            reg_init: 1e-6,
            reg_growth: 10.0,
            penalty_margin: 1.0,
        }
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy)]
pub struct SqpTraceRow {
    pub iter: usize,
    pub stationarity: f64,
    pub feasibility: f64,
    pub step_length: f64,
    pub merit: f64,
}

#[derive(Debug, Clone)]
pub struct SqpReport {
    pub traj: Trajectory,
    pub kkt: KktResidual,
    pub converged: bool,
    pub iters: usize,
    /// Number of Hessian regularization retries across all iterations.
    pub reg_events: usize,
    pub trace: Vec<SqpTraceRow>,
}

/// ℓ1 constraint violation of `t` (dynamics defects plus the pinned initial
/// state).
fn constraint_l1(ocp: &NlpOcp, t: &Trajectory) -> Result<f64, EvalError> {
    let mut total = 0.0;
    if ocp.initial == InitialCondition::Fixed {
        total += (&t.x[0] - &ocp.x0).abs().sum();
    }
    for k in 0..ocp.n {
        let fx = ocp.model.dynamics(k, &t.x[k], &t.u[k])?;
        total += (&t.x[k + 1] - fx).abs().sum();
    }
    Ok(total)
}

/// Builds the Newton-step LQ subproblem at the current iterate. The solution
/// is the primal step and the LQ multipliers are the updated multipliers.
fn newton_subproblem(ocp: &NlpOcp, t: &Trajectory, reg: f64) -> Result<LqProblemOf<f64>, SqpError> {
    let n = ocp.n;
    let (nx, nu) = (ocp.nx(), ocp.nu());
    let mut lq = LqProblemOf::zeros(n, nx, nu);
    for k in 0..n {
        let (x, u) = (&t.x[k], &t.u[k]);
        let lam = t.lambda_at(k as isize);
        let hess = ocp.model.lagrangian_hessian(k, x, u, lam)?;
        let (gx, gu) = ocp.model.cost_grad(k, x, u);
        let (a, b) = ocp.model.dynamics_jac(k, x, u)?;
        let st = &mut lq.stages[k];
        // Stored blocks carry the 1/2 of the no-half objective convention.
        st.q = hess.q * 0.5;
        st.s = hess.s * 0.5;
        st.r = hess.r * 0.5;
        for i in 0..nx {
            st.q[(i, i)] += reg * 0.5;
        }
        for i in 0..nu {
            st.r[(i, i)] += reg * 0.5;
        }
        st.a = a;
        st.b = b;
        st.v = ocp.model.dynamics(k, x, u)? - &t.x[k + 1];
        st.r_lin = gx;
        st.s_lin = gu;
    }
    lq.qn = ocp.model.terminal_hessian(&t.x[n]) * 0.5;
    for i in 0..nx {
        lq.qn[(i, i)] += reg * 0.5;
    }
    lq.rn_lin = ocp.model.terminal_grad(&t.x[n]);
    match ocp.initial {
        InitialCondition::Fixed => lq.x0 = &ocp.x0 - &t.x[0],
        InitialCondition::Free => lq.free_initial = true,
    }
    Ok(lq)
}

fn advance(t: &Trajectory, step: &Trajectory, alpha: f64) -> Trajectory {
    let mut out = t.clone();
    for k in 0..=t.n {
        out.x[k] += &step.x[k] * alpha;
    }
    for k in 0..t.n {
        out.u[k] += &step.u[k] * alpha;
    }
    // λ ← λ + α (λ⁺ - λ); the step trajectory stores λ⁺ directly.
    for j in 0..=t.n {
        let cur = out.lambda[j].clone();
        out.lambda[j] = &cur + (&step.lambda[j] - &cur) * alpha;
    }
    out
}

/// Solves `ocp` starting from `init` (multiplier slots included).
pub fn sqp_solve(ocp: &NlpOcp, init: &Trajectory, opts: &SqpOptions) -> Result<SqpReport, SqpError> {
    let mut t = init.clone();
    let mut trace = Vec::new();
    let mut penalty = 1.0_f64;
    let mut reg_events = 0usize;

    for iter in 0..opts.max_iters {
        let kkt = ocp.kkt_residual(&t)?;
        if kkt.max() <= opts.tol {
            return Ok(SqpReport { traj: t, kkt, converged: true, iters: iter, reg_events, trace });
        }

        // Solve the Newton subproblem, regularizing on indefiniteness.
        let mut reg = 0.0;
        let step = loop {
            let lq = newton_subproblem(ocp, &t, reg)?;
            match lq_solve(&lq) {
                Ok(s) => break s,
                Err(LqError::IndefiniteW(_)) | Err(LqError::IndefiniteInitial) => {
                    reg_events += 1;
                    reg = if reg == 0.0 { opts.reg_init } else { reg * opts.reg_growth };
                    if reg > 1e12 {
                        return Err(SqpError::Lq(LqError::IndefiniteW(0)));
                    }
                }
                Err(e) => return Err(SqpError::Lq(e)),
            }
        };

        // ℓ1 merit line search along the combined primal-dual direction.
        let lam_inf = step
            .lambda
            .iter()
            .flat_map(|l| l.iter())
            .fold(0.0_f64, |m, &v| m.max(v.abs()));
        penalty = penalty.max(lam_inf + opts.penalty_margin);

        let c0 = constraint_l1(ocp, &t)?;
        let merit0 = ocp.objective(&t) + penalty * c0;
        let mut grad_dot_p = ocp.model.terminal_grad(&t.x[ocp.n]).dot(&step.x[ocp.n]);
        for k in 0..ocp.n {
            let (gx, gu) = ocp.model.cost_grad(k, &t.x[k], &t.u[k]);
            grad_dot_p += gx.dot(&step.x[k]) + gu.dot(&step.u[k]);
        }
        // Clamp the model decrease at zero so accepted steps never increase
        // the merit function.
        let descent = (grad_dot_p - penalty * c0).min(0.0);

        let mut alpha = 1.0;
        let (next, merit) = loop {
            let trial = advance(&t, &step, alpha);
            // Evaluation failures at a trial point shrink the step instead of
            // aborting, so the search can retreat into the admissible region.
            let merit_trial = match constraint_l1(ocp, &trial) {
                Ok(c) => Some(ocp.objective(&trial) + penalty * c),
                Err(_) => None,
            };
            if let Some(m) = merit_trial {
                if m <= merit0 + opts.armijo * alpha * descent {
                    break (trial, m);
                }
            }
            alpha *= opts.backtrack;
            if alpha < opts.min_step {
                return Err(SqpError::LineSearchFailure);
            }
        };

        trace.push(SqpTraceRow {
            iter,
            stationarity: kkt.stat,
            feasibility: kkt.feas,
            step_length: alpha,
            merit,
        });
        t = next;
    }

    let kkt = ocp.kkt_residual(&t)?;
    if kkt.max() <= opts.tol {
        let iters = opts.max_iters;
        return Ok(SqpReport { traj: t, kkt, converged: true, iters, reg_events, trace });
    }
    Err(SqpError::MaxIterations)
}

/// Central finite-difference check of a model's analytic derivatives at one
/// point. Returns the largest entrywise error, scaled by `1 + |analytic|`.
pub fn check_derivatives(
    ocp: &NlpOcp,
    k: usize,
    x: &DVector<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    h: f64,
) -> Result<f64, EvalError> {
    let model = ocp.model.as_ref();
    let (nx, nu) = (model.nx(), model.nu());
    let mut worst: f64 = 0.0;
    let mut record = |analytic: f64, fd: f64| {
        worst = worst.max((analytic - fd).abs() / (1.0 + analytic.abs()));
    };

    let (gx, gu) = model.cost_grad(k, x, u);
    let (a, b) = model.dynamics_jac(k, x, u)?;
    let hess = model.lagrangian_hessian(k, x, u, lambda)?;
    let lag_grad = |x: &DVector<f64>, u: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>), EvalError> {
        let (gx, gu) = model.cost_grad(k, x, u);
        let (a, b) = model.dynamics_jac(k, x, u)?;
        Ok((gx - a.transpose() * lambda, gu - b.transpose() * lambda))
    };

    for i in 0..nx {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;

        record(gx[i], (model.cost(k, &xp, u) - model.cost(k, &xm, u)) / (2.0 * h));
        let (fp, fm) = (model.dynamics(k, &xp, u)?, model.dynamics(k, &xm, u)?);
        for r in 0..nx {
            record(a[(r, i)], (fp[r] - fm[r]) / (2.0 * h));
        }
        let (lp_x, lp_u) = lag_grad(&xp, u)?;
        let (lm_x, lm_u) = lag_grad(&xm, u)?;
        for r in 0..nx {
            record(hess.q[(r, i)], (lp_x[r] - lm_x[r]) / (2.0 * h));
        }
        for r in 0..nu {
            record(hess.s[(r, i)], (lp_u[r] - lm_u[r]) / (2.0 * h));
        }

        let tg = model.terminal_grad(x);
        record(tg[i], (model.terminal_cost(&xp) - model.terminal_cost(&xm)) / (2.0 * h));
        let th = model.terminal_hessian(x);
        let (tp, tm) = (model.terminal_grad(&xp), model.terminal_grad(&xm));
        for r in 0..nx {
            record(th[(r, i)], (tp[r] - tm[r]) / (2.0 * h));
        }
    }
    for i in 0..nu {
        let mut up = u.clone();
        let mut um = u.clone();
        up[i] += h;
        um[i] -= h;

        record(gu[i], (model.cost(k, x, &up) - model.cost(k, x, &um)) / (2.0 * h));
        let (fp, fm) = (model.dynamics(k, x, &up)?, model.dynamics(k, x, &um)?);
        for r in 0..nx {
            record(b[(r, i)], (fp[r] - fm[r]) / (2.0 * h));
        }
        let (_, lp_u) = lag_grad(x, &up)?;
        let (_, lm_u) = lag_grad(x, &um)?;
        for r in 0..nu {
            record(hess.r[(r, i)], (lp_u[r] - lm_u[r]) / (2.0 * h));
        }
    }
    Ok(worst)
}
