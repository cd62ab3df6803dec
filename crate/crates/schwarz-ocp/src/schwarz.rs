//! Overlapping Schwarz decomposition of the time horizon.
//!
//! The horizon `[0, N]` is split at breakpoints `m_0 = 0 < ... < m_T = N`
//! and each interval is expanded by the overlap `τ`:
//! `n_i^1 = max(m_i − τ, 0)`, `n_i^2 = min(m_{i+1} + τ, N)`. Each outer
//! iteration solves the `T` subproblems in parallel against boundary data
//! frozen from the current iterate (a Jacobi sweep), then discards the
//! overlap regions and concatenates the interiors into the next iterate.
//!
//! Subproblem `i < T−1` replaces the terminal cost with
//!
//! ```text
//! g̃(x) = g_{n_i^2}(x, ū) − λ̄ᵀ f_{n_i^2}(x, ū) + (μ/2)‖x − x̄‖²
//! ```
//!
//! where `(x̄, ū, λ̄)` is the current iterate at the right expanded boundary
//! and `μ ≥ 0` is a uniform penalty; the last subproblem keeps `g_N`. The
//! stopping criterion uses the seam mismatches of the discarded overlaps:
//! the primal residual compares states at interior breakpoints, the dual
//! residual compares multipliers just before them.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{EvalError, SchwarzError};
use crate::nlp::{sqp_solve, SqpOptions};
use crate::ocp::{HessBlock, InitialCondition, NlpOcp, OcpModel};
use crate::traj::{BoundaryDataOf, SubTrajectoryOf, TerminalDataOf, TrajectoryOf};

pub type Trajectory = TrajectoryOf<f64>;
pub type SubTrajectory = SubTrajectoryOf<f64>;
pub type BoundaryData = BoundaryDataOf<f64>;

/// Overlap specification: a fixed stage count, or a size relative to the
/// subdomain length (each side expands by `⌈τ̃·len/2⌉` stages).
#[derive(Debug, Clone, Copy)]
pub enum Overlap {
    Stages(usize),
    Relative(f64),
}

/// Breakpoints and expanded boundaries of the decomposition.
#[derive(Debug, Clone)]
pub struct Partition {
    pub n: usize,
    /// `m_0, ..., m_T`.
    pub ms: Vec<usize>,
    /// Per-subdomain overlap stages `τ_i`.
    pub tau: Vec<usize>,
    /// Left expanded boundaries `n_i^1`.
    pub n1: Vec<usize>,
    /// Right expanded boundaries `n_i^2`.
    pub n2: Vec<usize>,
}

impl Partition {
    /// Number of subdomains.
    pub fn t(&self) -> usize {
        self.ms.len() - 1
    }

    /// Writes the partition table as CSV rows `i,m_i,m_{i+1},n1_i,n2_i`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "i,m_i,m_i1,n1_i,n2_i")?;
        for i in 0..self.t() {
            writeln!(
                out,
                "{i},{},{},{},{}",
                self.ms[i],
                self.ms[i + 1],
                self.n1[i],
                self.n2[i]
            )?;
        }
        Ok(())
    }
}

/// Splits `[0, N]` into `T` near-equal intervals (remainder stages go to the
/// leading intervals) and applies the overlap expansion.
pub fn make_partition(n: usize, t: usize, overlap: Overlap) -> Result<Partition, SchwarzError> {
    if t == 0 || n < t {
        return Err(SchwarzError::InvalidPartition { t, n });
    }
    let base = n / t;
    let rem = n % t;
    let mut ms = Vec::with_capacity(t + 1);
    let mut m = 0;
    ms.push(0);
    for i in 0..t {
        m += base + usize::from(i < rem);
        ms.push(m);
    }

    let mut tau = Vec::with_capacity(t);
    let mut n1 = Vec::with_capacity(t);
    let mut n2 = Vec::with_capacity(t);
    for i in 0..t {
        let len = ms[i + 1] - ms[i];
        let ti = match overlap {
            Overlap::Stages(s) => s,
            Overlap::Relative(rel) => {
                assert!(rel >= 0.0, "relative overlap must be nonnegative");
                (rel * len as f64 / 2.0).ceil() as usize
            }
        };
        tau.push(ti);
        n1.push(ms[i].saturating_sub(ti));
        n2.push((ms[i + 1] + ti).min(n));
    }
    Ok(Partition { n, ms, tau, n1, n2 })
}

/// `μ̄ = 16Υ(Υ^{6t} − Υ^{4t})/γ_C²`, the conservative penalty threshold.
pub fn mu_bar(upsilon_upper: f64, gamma_c: f64, t: usize) -> f64 {
    let u = upsilon_upper;
    16.0 * u * (u.powi(6 * t as i32) - u.powi(4 * t as i32)) / (gamma_c * gamma_c)
}

enum TerminalKind {
    /// Last subdomain, or an expansion that reaches stage `N`: keep `g_N`.
    Full,
    /// Adjusted terminal cost anchored at `(x̄, ū, λ̄)` of stage `stage`.
    Adjusted {
        stage: usize,
        xbar: DVector<f64>,
        ubar: DVector<f64>,
        lambda: DVector<f64>,
        mu: f64,
    },
}

/// Window view of a model: stage `k` maps to absolute stage `offset + k`,
/// with the terminal cost replaced per the subdomain's role.
struct SubModel {
    base: Arc<dyn OcpModel>,
    offset: usize,
    terminal: TerminalKind,
}

impl OcpModel for SubModel {
    fn nx(&self) -> usize {
        self.base.nx()
    }

    fn nu(&self) -> usize {
        self.base.nu()
    }

    fn cost(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.base.cost(self.offset + k, x, u)
    }

    fn cost_grad(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        self.base.cost_grad(self.offset + k, x, u)
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
        self.base.lagrangian_hessian(self.offset + k, x, u, lambda)
    }

    fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        match &self.terminal {
            TerminalKind::Full => self.base.terminal_cost(x),
            TerminalKind::Adjusted { stage, xbar, ubar, lambda, mu } => {
                // An evaluation failure poisons the value with NaN so that a
                // line search backtracks away from the inadmissible point.
                let f = match self.base.dynamics(*stage, x, ubar) {
                    Ok(f) => f,
                    Err(_) => return f64::NAN,
                };
                let d = x - xbar;
                self.base.cost(*stage, x, ubar) - lambda.dot(&f) + 0.5 * mu * d.norm_squared()
            }
        }
    }

    fn terminal_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.terminal {
            TerminalKind::Full => self.base.terminal_grad(x),
            TerminalKind::Adjusted { stage, xbar, ubar, lambda, mu } => {
                let (gx, _) = self.base.cost_grad(*stage, x, ubar);
                let (a, _) = self
                    .base
                    .dynamics_jac(*stage, x, ubar)
                    .expect("adjusted terminal gradient queried at an inadmissible state");
                gx - a.transpose() * lambda + (x - xbar) * *mu
            }
        }
    }

    fn terminal_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.terminal {
            TerminalKind::Full => self.base.terminal_hessian(x),
            TerminalKind::Adjusted { stage, xbar: _, ubar, lambda, mu } => {
                let h = self
                    .base
                    .lagrangian_hessian(*stage, x, ubar, lambda)
                    .expect("adjusted terminal Hessian queried at an inadmissible state");
                h.q + DMatrix::identity(self.nx(), self.nx()) * *mu
            }
        }
    }
}

/// Extracts the boundary data `w_[-i] = (x_{n_i^1}; w_{n_i^2})` for
/// subproblem `i` from the current iterate.
pub fn boundary_data(w: &Trajectory, part: &Partition, i: usize) -> BoundaryData {
    let n2 = part.n2[i];
    // When the expansion reaches the true end of the horizon there is no
    // stage-(n2) control or dual; the subproblem then keeps g_N.
    let w_term = if i + 1 < part.t() && n2 < part.n {
        Some(TerminalDataOf {
            x: w.x[n2].clone(),
            u: w.u[n2].clone(),
            lambda: w.lambda_at(n2 as isize).clone(),
        })
    } else {
        None
    };
    BoundaryData { i, x_init: w.x[part.n1[i]].clone(), w_term }
}

/// Assembles subproblem `i` of the decomposition.
pub fn build_subproblem(
    p: &NlpOcp,
    part: &Partition,
    i: usize,
    b: &BoundaryData,
    mu: f64,
) -> Result<NlpOcp, SchwarzError> {
    let (n1, n2) = (part.n1[i], part.n2[i]);
    let terminal = match &b.w_term {
        Some(term) => TerminalKind::Adjusted {
            stage: n2,
            xbar: term.x.clone(),
            ubar: term.u.clone(),
            lambda: term.lambda.clone(),
            mu,
        },
        None => {
            if i + 1 < part.t() && n2 < part.n {
                return Err(SchwarzError::MissingBoundary(i));
            }
            TerminalKind::Full
        }
    };
    Ok(NlpOcp {
        model: Arc::new(SubModel { base: p.model.clone(), offset: n1, terminal }),
        n: n2 - n1,
        x0: b.x_init.clone(),
        initial: InitialCondition::Fixed,
    })
}

/// Seam residuals of one outer iteration: the primal
/// residual compares, at every interior breakpoint `m_i`, the state kept in
/// the concatenation with the discarded state of subproblem `i−1`; the dual
/// residual compares the multipliers `λ_{m_i−1}` kept from subproblem `i−1`
/// with the discarded ones of subproblem `i`.
pub fn residuals(
    next: &Trajectory,
    subs: &[SubTrajectory],
    part: &Partition,
) -> Result<(f64, f64), SchwarzError> {
    let t = part.t();
    if t > 1 && part.tau.iter().any(|&ti| ti == 0) {
        return Err(SchwarzError::InvalidOverlap);
    }
    let mut pr: f64 = 0.0;
    let mut du: f64 = 0.0;
    for i in 1..t {
        let m = part.ms[i];
        pr = pr.max((subs[i - 1].x_at(m) - &next.x[m]).norm());
        du = du.max((subs[i].lambda_at(m as isize - 1) - next.lambda_at(m as isize - 1)).norm());
    }
    Ok((pr, du))
}

#[derive(Debug, Clone)]
pub struct SchwarzConfig {
    /// Terminal penalty μ.
    pub mu: f64,
    /// Number of subdomains.
    pub t: usize,
    pub overlap: Overlap,
    pub tol_pr: f64,
    pub tol_du: f64,
    pub max_outer: usize,
    pub inner: SqpOptions,
    /// Optional centralized solution for per-iteration error tracking.
    pub reference: Option<Trajectory>,
}

impl SchwarzConfig {
    pub fn new(t: usize, overlap: Overlap) -> Self {
        Self {
            mu: 1.0,
            t,
            overlap,
            tol_pr: 1e-8,
            tol_du: 1e-8,
            max_outer: 200,
            inner: SqpOptions::default(),
            reference: None,
        }
    }
}

/// One row of the outer-iteration record.
#[derive(Debug, Clone)]
pub struct OuterIterRow {
    pub iter: usize,
    pub eps_pr: f64,
    pub eps_du: f64,
    pub kkt_stat: f64,
    pub kkt_feas: f64,
    pub err_vs_ref: Option<f64>,
    pub wall_s: f64,
    pub inner_iters: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceRecord {
    pub rows: Vec<OuterIterRow>,
}

impl ConvergenceRecord {
    /// Writes the record as CSV
    /// `iter,eps_pr,eps_du,kkt_stat,kkt_feas,err_vs_ref,wall_s`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "iter,eps_pr,eps_du,kkt_stat,kkt_feas,err_vs_ref,wall_s")?;
        for r in &self.rows {
            let err = r.err_vs_ref.map(|e| e.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{},{:.6}",
                r.iter, r.eps_pr, r.eps_du, r.kkt_stat, r.kkt_feas, err, r.wall_s
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SchwarzOutput {
    pub traj: Trajectory,
    pub record: ConvergenceRecord,
    pub partition: Partition,
    pub outer_iters: usize,
}

/// Runs the decomposition loop from `start` (whose initial state must match
/// the problem's).
pub fn schwarz_solve(
    p: &NlpOcp,
    cfg: &SchwarzConfig,
    start: &Trajectory,
) -> Result<SchwarzOutput, SchwarzError> {
    let part = make_partition(p.n, cfg.t, cfg.overlap)?;
    let t = part.t();
    let mut w = start.clone();
    let mut record = ConvergenceRecord::default();

    for iter in 0..cfg.max_outer {
        let tick = Instant::now();

        // Jacobi sweep: every subproblem reads the frozen iterate w.
        let results: Vec<_> = (0..t)
            .into_par_iter()
            .map(|i| {
                let b = boundary_data(&w, &part, i);
                let sub = build_subproblem(p, &part, i, &b, cfg.mu)?;
                let warm = w.slice(part.n1[i], part.n2[i]);
                let rep = sqp_solve(&sub, &warm, &cfg.inner)
                    .map_err(|source| SchwarzError::SubproblemFailure { i, iter, source })?;
                let sub = SubTrajectory { i, n1: part.n1[i], n2: part.n2[i], traj: rep.traj };
                Ok((sub, rep.iters))
            })
            .collect::<Result<Vec<_>, SchwarzError>>()?;
        let (subs, inner_iters): (Vec<_>, Vec<_>) = results.into_iter().unzip();

        // Discard overlaps and concatenate interiors.
        let mut next = w.clone();
        for (i, sub) in subs.iter().enumerate() {
            for k in part.ms[i]..part.ms[i + 1] {
                next.x[k] = sub.x_at(k).clone();
                next.u[k] = sub.traj.u[k - sub.n1].clone();
                *next.lambda_at_mut(k as isize) = sub.lambda_at(k as isize).clone();
            }
        }
        *next.lambda_at_mut(-1) = subs[0].lambda_at(-1).clone();
        next.x[p.n] = subs[t - 1].x_at(p.n).clone();

        let (eps_pr, eps_du) = residuals(&next, &subs, &part)?;
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

        if eps_pr <= cfg.tol_pr && eps_du <= cfg.tol_du {
            return Ok(SchwarzOutput { traj: w, record, partition: part, outer_iters: iter + 1 });
        }
    }

    Err(SchwarzError::MaxOuterIterations(Box::new(SchwarzOutput {
        traj: w,
        record,
        partition: part,
        outer_iters: cfg.max_outer,
    })))
}
