//! Temporal-decomposition baselines: consensus ADMM.
//!
//! The horizon is split at the breakpoints `m_1 < ... < m_{T-1}` of a
//! non-overlapping partition and every seam state `x_{m_i}` is duplicated:
//! subproblem `i-1` carries a left copy (its terminal state) and subproblem
//! `i` a right copy (its free initial state). With consensus variables
//! `z_i` and scaled duals `y_i^L, y_i^R`, each ADMM iteration
//!
//! 1. solves the `T` augmented subproblems in parallel, where each copy
//!    pays `(ρ/2)‖x − z_i + y_i‖²`,
//! 2. updates the consensus `z_i ← ½(x_i^L + y_i^L + x_i^R + y_i^R)`,
//! 3. updates the scaled duals `y_i ← y_i + x_i − z_i`.
//!
//! The seam primal residual is `max_i max(‖x_i^L − z_i‖, ‖x_i^R − z_i‖)`
//! and the dual residual `ρ max_i ‖z_i − z_i^prev‖`. A full-problem KKT
//! point with consistent copies `z_i = x̄_{m_i}` and duals
//! `y_i^L = −λ̄_{m_i−1}/ρ`, `y_i^R = +λ̄_{m_i−1}/ρ` is a fixed point, which
//! is how the duals are initialized from the start trajectory.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{EvalError, SchwarzError};
use crate::nlp::{sqp_solve, SqpOptions};
use crate::ocp::{HessBlock, InitialCondition, NlpOcp, OcpModel};
use crate::schwarz::{make_partition, ConvergenceRecord, OuterIterRow, Overlap, Partition};
use crate::traj::TrajectoryOf;

pub type Trajectory = TrajectoryOf<f64>;

#[derive(Debug, Clone)]
pub struct AdmmConfig {
    /// Consensus penalty ρ.
    pub rho: f64,
    /// Number of subdomains.
    pub t: usize,
    pub tol_pr: f64,
    pub tol_du: f64,
    pub max_iters: usize,
    pub inner: SqpOptions,
    /// Optional centralized solution for per-iteration error tracking.
    pub reference: Option<Trajectory>,
}

impl AdmmConfig {
    pub fn new(t: usize, rho: f64) -> Self {
        assert!(rho > 0.0, "penalty must be positive");
        Self {
            rho,
            t,
            tol_pr: 1e-8,
            tol_du: 1e-8,
            max_iters: 500,
            inner: SqpOptions::default(),
            reference: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdmmOutput {
    pub traj: Trajectory,
    pub record: ConvergenceRecord,
    pub partition: Partition,
    /// Whether the seam residuals met the tolerances within the iteration
    /// budget. A non-converged run still returns its trace, since the
    /// baseline is expected to plateau on nonconvex problems.
    pub converged: bool,
    pub iters: usize,
}

/// Window view of a model for one ADMM subproblem: stage `k` maps to
/// absolute stage `offset + k`; the initial and terminal states may carry
/// proximal consensus terms `(ρ/2)‖x − a‖²` with `a = z − y`.
struct AdmmSubModel {
    base: Arc<dyn OcpModel>,
    offset: usize,
    rho: f64,
    /// Proximal target for the local initial state (subproblems `i > 0`).
    init_target: Option<DVector<f64>>,
    /// Proximal target replacing the terminal cost (subproblems `i < T-1`);
    /// `None` keeps the true terminal cost.
    term_target: Option<DVector<f64>>,
}

impl OcpModel for AdmmSubModel {
    fn nx(&self) -> usize {
        self.base.nx()
    }

    fn nu(&self) -> usize {
        self.base.nu()
    }

    fn cost(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let mut c = self.base.cost(self.offset + k, x, u);
        if k == 0 {
            if let Some(a) = &self.init_target {
                c += 0.5 * self.rho * (x - a).norm_squared();
            }
        }
        c
    }

    fn cost_grad(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut gx, gu) = self.base.cost_grad(self.offset + k, x, u);
        if k == 0 {
            if let Some(a) = &self.init_target {
                gx += (x - a) * self.rho;
            }
        }
        (gx, gu)
    }

    fn dynamics(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        self.base.dynamics(self.offset + k, x, u)
    }

    fn dynamics_jac(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        self.base.dynamics_jac(self.offset + k, x, u)
    }

    fn lagrangian_hessian(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<HessBlock, EvalError> {
        let mut h = self.base.lagrangian_hessian(self.offset + k, x, u, lambda)?;
        if k == 0 && self.init_target.is_some() {
            for i in 0..self.nx() {
                h.q[(i, i)] += self.rho;
            }
        }
        Ok(h)
    }

    fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        match &self.term_target {
            None => self.base.terminal_cost(x),
            Some(a) => 0.5 * self.rho * (x - a).norm_squared(),
        }
    }

    fn terminal_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.term_target {
            None => self.base.terminal_grad(x),
            Some(a) => (x - a) * self.rho,
        }
    }

    fn terminal_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.term_target {
            None => self.base.terminal_hessian(x),
            Some(_) => DMatrix::identity(self.nx(), self.nx()) * self.rho,
        }
    }
}

/// Runs consensus ADMM on `p` from `start`, whose multipliers seed the seam
/// duals. Subproblem failures abort; exhausting the iteration budget does
/// not, it returns the trace with `converged = false`.
pub fn admm_solve(
    p: &NlpOcp,
    cfg: &AdmmConfig,
    start: &Trajectory,
) -> Result<AdmmOutput, SchwarzError> {
    let part = make_partition(p.n, cfg.t, Overlap::Stages(0))?;
    let t = part.t();
    let rho = cfg.rho;
    let mut w = start.clone();
    let mut record = ConvergenceRecord::default();

    // Seam consensus variables and scaled duals, indexed by seam 1..T-1.
    let mut z: Vec<DVector<f64>> = (1..t).map(|i| w.x[part.ms[i]].clone()).collect();
    let mut yl: Vec<DVector<f64>> =
        (1..t).map(|i| -w.lambda_at(part.ms[i] as isize - 1) / rho).collect();
    let mut yr: Vec<DVector<f64>> =
        (1..t).map(|i| w.lambda_at(part.ms[i] as isize - 1) / rho).collect();

    let mut converged = false;
    let mut iters = 0;
    for iter in 0..cfg.max_iters {
        let tick = Instant::now();

        let results: Vec<_> = (0..t)
            .into_par_iter()
            .map(|i| {
                let (lo, hi) = (part.ms[i], part.ms[i + 1]);
                let model = AdmmSubModel {
                    base: p.model.clone(),
                    offset: lo,
                    rho,
                    init_target: (i > 0).then(|| &z[i - 1] - &yr[i - 1]),
                    term_target: (i + 1 < t).then(|| &z[i] - &yl[i]),
                };
                let sub = NlpOcp {
                    model: Arc::new(model),
                    n: hi - lo,
                    x0: p.x0.clone(),
                    initial: if i == 0 { InitialCondition::Fixed } else { InitialCondition::Free },
                };
                let mut warm = w.slice(lo, hi);
                if i > 0 {
                    // A free initial state carries no λ_{-1}.
                    *warm.lambda_at_mut(-1) = DVector::zeros(p.nx());
                }
                let rep = sqp_solve(&sub, &warm, &cfg.inner)
                    .map_err(|source| SchwarzError::SubproblemFailure { i, iter, source })?;
                Ok((rep.traj, rep.iters))
            })
            .collect::<Result<Vec<_>, SchwarzError>>()?;
        let (subs, inner_iters): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let subs: Vec<Trajectory> = subs;

        // Consensus and scaled-dual updates; the dual residual tracks the
        // consensus movement.
        let mut eps_pr: f64 = 0.0;
        let mut eps_du: f64 = 0.0;
        for s in 1..t {
            let xl = subs[s - 1].x.last().unwrap();
            let xr = &subs[s].x[0];
            let z_new = (xl + &yl[s - 1] + xr + &yr[s - 1]) * 0.5;
            eps_du = eps_du.max(rho * (&z_new - &z[s - 1]).norm());
            eps_pr = eps_pr.max((xl - &z_new).norm()).max((xr - &z_new).norm());
            yl[s - 1] += xl - &z_new;
            yr[s - 1] += xr - &z_new;
            z[s - 1] = z_new;
        }

        // Concatenate: interiors from their owners, seam states from the
        // consensus, seam duals from the left owner.
        let mut next = w.clone();
        for (i, sub) in subs.iter().enumerate() {
            let lo = part.ms[i];
            for k in lo..part.ms[i + 1] {
                next.x[k] = sub.x[k - lo].clone();
                next.u[k] = sub.u[k - lo].clone();
                *next.lambda_at_mut(k as isize) = sub.lambda_at((k - lo) as isize).clone();
            }
        }
        *next.lambda_at_mut(-1) = subs[0].lambda_at(-1).clone();
        next.x[p.n] = subs[t - 1].x.last().unwrap().clone();
        for s in 1..t {
            next.x[part.ms[s]] = z[s - 1].clone();
        }

        let kkt = p.kkt_residual(&next)?;
        record.rows.push(OuterIterRow {
            iter,
            eps_pr,
            eps_du,
            kkt_stat: kkt.stat,
            kkt_feas: kkt.feas,
            err_vs_ref: cfg.reference.as_ref().map(|r| next.norm_w_diff(r)),
            wall_s: tick.elapsed().as_secs_f64(),
            inner_iters,
        });
        w = next;
        iters = iter + 1;

        if eps_pr <= cfg.tol_pr && eps_du <= cfg.tol_du {
            converged = true;
            break;
        }
    }

    Ok(AdmmOutput { traj: w, record, partition: part, converged, iters })
}
