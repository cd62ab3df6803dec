//! Parametric sensitivity of optimal control solutions.
//!
//! Given a KKT point `w⋆ = (x⋆, u⋆, λ⋆)` of a nonlinear OCP whose model
//! depends on an external data vector `d`, the directional derivative of
//! `w⋆` along a data direction `l` is the solution of a linear-quadratic
//! problem built from the Lagrangian Hessian, the dynamics Jacobians, and
//! the data-coupling blocks, all evaluated at `w⋆`:
//!
//! ```text
//! min  Σ_k (p_k; q_k)^T H̄_k (p_k; q_k) + 2 l_k^T (D_{k1} p_k + D_{k2} q_k)
//! s.t. p_{k+1} = A_k p_k + B_k q_k + C_k l_k,   p_0 = l_{-1}
//! ```
//!
//! with `H̄_k = ½∇²L_k`, so the quadratic blocks follow the no-half
//! objective convention of [`crate::lq`]. [`build_sensitivity_lqp`]
//! constructs this problem; its primal solution `(p, q)` and multipliers
//! `ζ` are the derivatives of `(x⋆, u⋆, λ⋆)`.
//!
//! [`eds_probe`] measures the exponential decay of sensitivity
//! empirically: it re-solves a problem under boundary perturbations and
//! fits `d_k ≈ Υ̂ ρ̂^{dist(k)}` to the stagewise deviation profile, where
//! `dist(k)` is the distance from the perturbed boundary.

use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::SensitivityError;
use crate::lq::{CouplingOf, CouplingStageOf, LqProblemOf};
use crate::nlp::{sqp_solve, SqpOptions};
use crate::ocp::{InitialCondition, NlpOcp};
use crate::traj::TrajectoryOf;

pub type Trajectory = TrajectoryOf<f64>;

/// KKT residual above this disqualifies a base point for sensitivity
/// analysis.
const KKT_TOL: f64 = 1e-8;
/// Deviations below this are treated as numerical noise and excluded from
/// decay fits.
const NOISE_FLOOR: f64 = 1e-12;
/// Minimum number of stages in the fit region for `ρ̂` to be reported.
const MIN_FIT_STAGES: usize = 5;

/// A perturbation direction: initial-state component `l_{-1}`, per-stage
/// data components `l_0, ..., l_{N-1}`, and terminal data component `l_N`.
#[derive(Debug, Clone)]
pub struct Direction {
    /// `l_{-1}`, length `n_x`.
    pub l_init: DVector<f64>,
    /// `l_k` for `k < N`, each of length `data_dim`.
    pub stages: Vec<DVector<f64>>,
    /// `l_N`, length `data_dim`.
    pub l_term: DVector<f64>,
}

impl Direction {
    pub fn zeros(ocp: &NlpOcp) -> Self {
        let nd = ocp.model.data_dim();
        Self {
            l_init: DVector::zeros(ocp.nx()),
            stages: (0..ocp.n).map(|_| DVector::zeros(nd)).collect(),
            l_term: DVector::zeros(nd),
        }
    }

    /// A pure initial-state direction.
    pub fn initial(ocp: &NlpOcp, l_init: DVector<f64>) -> Self {
        Self { l_init, ..Self::zeros(ocp) }
    }
}

/// Builds the sensitivity LQP of `ocp` at the KKT point `at` along `dir`.
///
/// The returned problem stores the halved Lagrangian Hessian blocks, the
/// dynamics Jacobians, and the coupling blocks `(½∂²L/∂d∂x, ½∂²L/∂d∂u,
/// ∂f/∂d)` with the direction folded in through the coupling, so
/// [`crate::lq::lq_solve`] on it yields the directional derivatives
/// `(p, q, ζ)` of the primal-dual solution.
///
/// Fails with [`SensitivityError::NotAtKkt`] when the stagewise KKT
/// residual of `at` exceeds `1e-8`.
pub fn build_sensitivity_lqp(
    ocp: &NlpOcp,
    at: &Trajectory,
    dir: &Direction,
) -> Result<LqProblemOf<f64>, SensitivityError> {
    let kkt = ocp.kkt_residual(at)?;
    if kkt.max() > KKT_TOL {
        return Err(SensitivityError::NotAtKkt(kkt.max()));
    }

    let n = ocp.n;
    let (nx, nu) = (ocp.nx(), ocp.nu());
    let nd = ocp.model.data_dim();
    let mut lq = LqProblemOf::zeros(n, nx, nu);
    let mut coupling = CouplingOf {
        stages: Vec::with_capacity(n),
        dn: ocp.model.terminal_data_cross(&at.x[n]) * 0.5,
        ln: dir.l_term.clone(),
    };

    for k in 0..n {
        let (x, u) = (&at.x[k], &at.u[k]);
        let lam = at.lambda_at(k as isize);
        let hess = ocp.model.lagrangian_hessian(k, x, u, lam)?;
        let (a, b) = ocp.model.dynamics_jac(k, x, u)?;
        let (d1, d2) = ocp.model.cost_data_cross(k, x, u, lam)?;
        let c = ocp.model.dynamics_data_jac(k, x, u)?;

        let st = &mut lq.stages[k];
        // Stored blocks carry the 1/2 of the no-half objective convention.
        st.q = hess.q * 0.5;
        st.s = hess.s * 0.5;
        st.r = hess.r * 0.5;
        st.a = a;
        st.b = b;
        coupling.stages.push(CouplingStageOf {
            d1: d1 * 0.5,
            d2: d2 * 0.5,
            c,
            l: dir.stages.get(k).cloned().unwrap_or_else(|| DVector::zeros(nd)),
        });
    }
    lq.qn = ocp.model.terminal_hessian(&at.x[n]) * 0.5;
    match ocp.initial {
        InitialCondition::Fixed => lq.x0 = dir.l_init.clone(),
        InitialCondition::Free => lq.free_initial = true,
    }
    lq.coupling = Some(coupling);
    Ok(lq)
}

/// Which end of the horizon a perturbation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Initial,
    Terminal,
    Both,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Initial => write!(f, "initial"),
            Boundary::Terminal => write!(f, "terminal"),
            Boundary::Both => write!(f, "both"),
        }
    }
}

/// A perturbed problem instance for [`eds_probe`]. The caller constructs
/// `ocp` by shifting the initial state and/or the terminal-stage data of
/// the reference problem.
#[derive(Clone)]
pub struct EdsPerturbation {
    pub ocp: NlpOcp,
    pub boundary: Boundary,
    pub magnitude: f64,
    pub descriptor: String,
}

#[derive(Debug, Clone)]
pub struct EdsOptions {
    pub sqp: SqpOptions,
    /// Number of stages nearest each boundary excluded from the decay fit.
    pub tau_exclude: usize,
}

impl Default for EdsOptions {
    fn default() -> Self {
        Self { sqp: SqpOptions::default(), tau_exclude: 3 }
    }
}

/// Decay profile of one perturbation.
#[derive(Debug, Clone)]
pub struct EdsReport {
    /// `d_k = ‖w_k^pert − w_k^ref‖_w` for `k = 0, ..., N`.
    pub deviations: Vec<f64>,
    /// Fitted decay rate, reported when the fit region has at least five
    /// stages above the noise floor.
    pub rho_hat: Option<f64>,
    /// Fitted prefactor of `d_k ≈ Υ̂ ρ̂^{dist(k)}`.
    pub upsilon_hat: Option<f64>,
    pub boundary: Boundary,
    pub magnitude: f64,
    pub descriptor: String,
}

impl EdsReport {
    /// Writes `stage,deviation` rows followed by a
    /// `rho_hat,upsilon_hat,boundary,magnitude` summary.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "stage,deviation")?;
        for (k, d) in self.deviations.iter().enumerate() {
            writeln!(out, "{k},{d:e}")?;
        }
        writeln!(out, "rho_hat,upsilon_hat,boundary,magnitude")?;
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{:e}",
            fmt_opt(self.rho_hat),
            fmt_opt(self.upsilon_hat),
            self.boundary,
            self.magnitude
        )
    }
}

/// Standard-normal vector via the Box-Muller transform, for seeded random
/// perturbation directions.
pub fn gaussian_vector<R: rand::Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}

/// Log-linear least squares of `log d_k` against the distance from the
/// perturbed boundary, over stages away from both boundaries and above the
/// noise floor. Returns `(ρ̂, Υ̂)`.
fn fit_decay(d: &[f64], boundary: Boundary, tau_exclude: usize) -> (Option<f64>, Option<f64>) {
    let n = d.len() - 1;
    let hi = match boundary {
        // A two-sided perturbation decays inward from both ends; fit the
        // initial-side half.
        Boundary::Both => n / 2,
        _ => n.saturating_sub(tau_exclude),
    };
    let mut pts = Vec::new();
    for k in tau_exclude..=hi.min(n) {
        if d[k] >= NOISE_FLOOR {
            let dist = match boundary {
                Boundary::Terminal => (n - k) as f64,
                _ => k as f64,
            };
            pts.push((dist, d[k].ln()));
        }
    }
    if pts.len() < MIN_FIT_STAGES {
        return (None, None);
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;
    (Some(slope.exp()), Some(intercept.exp()))
}

/// Solves each perturbed problem warm-started from the reference solution
/// `at` and reports the stagewise deviation profile with a fitted decay
/// rate. Perturbation solves run concurrently; reports come back in input
/// order.
pub fn eds_probe(
    at: &Trajectory,
    perturbations: &[EdsPerturbation],
    opts: &EdsOptions,
) -> Result<Vec<EdsReport>, SensitivityError> {
    perturbations
        .par_iter()
        .map(|p| {
            let rep = sqp_solve(&p.ocp, at, &opts.sqp).map_err(|source| {
                SensitivityError::PerturbedSolve { descriptor: p.descriptor.clone(), source }
            })?;
            let n = at.n;
            let mut deviations = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let mut dk = (&rep.traj.x[k] - &at.x[k]).norm();
                if k < n {
                    dk = dk.max((&rep.traj.u[k] - &at.u[k]).norm());
                    dk = dk
                        .max((rep.traj.lambda_at(k as isize) - at.lambda_at(k as isize)).norm());
                }
                deviations.push(dk);
            }
            let (rho_hat, upsilon_hat) = fit_decay(&deviations, p.boundary, opts.tau_exclude);
            Ok(EdsReport {
                deviations,
                rho_hat,
                upsilon_hat,
                boundary: p.boundary,
                magnitude: p.magnitude,
                descriptor: p.descriptor.clone(),
            })
        })
        .collect()
}
