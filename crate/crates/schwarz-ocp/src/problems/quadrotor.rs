//! Quadrotor trajectory tracking.
//!
//! State `(X, Ẋ, Y, Ẏ, Z, Ż, γ, β, α)`, control `(a, ω_X, ω_Y, ω_Z)`,
//! continuous dynamics
//!
//! ```text
//! Ẍ = a (cos γ sin β cos α + sin γ sin α)
//! Ÿ = a (cos γ sin β sin α − sin γ cos α)
//! Z̈ = a cos γ cos β − ḡ
//! γ̇ = (ω_X cos γ + ω_Y sin γ) / cos β
//! β̇ = −ω_X sin γ + ω_Y cos γ
//! α̇ = (ω_X cos γ + ω_Y sin γ) tan β + ω_Z
//! ```
//!
//! discretized with explicit Euler at step `Δt`. Stage cost
//! `½‖x − x^ref‖²_Q + ½‖u‖²_R`, terminal cost `(1/2Δt)‖x − x^ref‖²_Q`.
//!
//! The reference trajectory is sinusoidal in the position channels:
//! `X^ref_k = sin(2πk/N)`, `Y^ref_k = sin(2πk/N + 2π/3)`,
//! `Z^ref_k = sin(2πk/N + 4π/3)`, unit amplitude, all other channels zero.
//!
//! The external data vector of stage `k` is `x^ref_k`, which gives the
//! cost-side coupling blocks used by sensitivity probes.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::EvalError;
use crate::ocp::{HessBlock, InitialCondition, NlpOcp, OcpModel};

const NX: usize = 9;
const NU: usize = 4;
/// Reference phase offsets for the X, Y, Z channels.
const PHASES: [f64; 3] = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];
/// |cos β| below this is treated as the singular attitude.
const COS_BETA_MIN: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct QuadrotorParams {
    pub n: usize,
    pub dt: f64,
    pub gravity: f64,
    /// Diagonal of the state weight Q.
    pub q_diag: [f64; NX],
    /// Diagonal of the control weight R.
    pub r_diag: [f64; NU],
    /// Amplitude of the sinusoidal position reference.
    pub ref_amplitude: f64,
}

impl QuadrotorParams {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            dt: 0.005,
            gravity: 9.8,
            q_diag: [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0],
            r_diag: [0.1, 0.1, 0.1, 0.1],
            ref_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadrotorModel {
    pub params: QuadrotorParams,
    /// Shift applied to the terminal reference `x^ref_N` (used by
    /// terminal-boundary sensitivity probes).
    pub terminal_ref_offset: DVector<f64>,
}

impl QuadrotorModel {
    pub fn new(params: QuadrotorParams) -> Self {
        Self { params, terminal_ref_offset: DVector::zeros(NX) }
    }

    /// Reference state at absolute stage `k` (valid for `k ∈ [0, N]`).
    pub fn reference(&self, k: usize) -> DVector<f64> {
        let mut r = DVector::zeros(NX);
        let phase = 2.0 * PI * k as f64 / self.params.n as f64;
        for (c, &off) in PHASES.iter().enumerate() {
            r[2 * c] = self.params.ref_amplitude * (phase + off).sin();
        }
        r
    }

    fn terminal_reference(&self) -> DVector<f64> {
        self.reference(self.params.n) + &self.terminal_ref_offset
    }

    /// Continuous-time derivative; errors at the `cos β = 0` singularity.
    fn xdot(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        let (cg, sg) = (x[6].cos(), x[6].sin());
        let (cb, sb) = (x[7].cos(), x[7].sin());
        let (ca, sa) = (x[8].cos(), x[8].sin());
        if cb.abs() < COS_BETA_MIN {
            return Err(EvalError::TrigSingularity { stage: k });
        }
        let (a, wx, wy, wz) = (u[0], u[1], u[2], u[3]);
        let m = wx * cg + wy * sg;
        let mp = -wx * sg + wy * cg;
        let mut d = DVector::zeros(NX);
        d[0] = x[1];
        d[1] = a * (cg * sb * ca + sg * sa);
        d[2] = x[3];
        d[3] = a * (cg * sb * sa - sg * ca);
        d[4] = x[5];
        d[5] = a * cg * cb - self.params.gravity;
        d[6] = m / cb;
        d[7] = mp;
        d[8] = m * sb / cb + wz;
        Ok(d)
    }
}

impl OcpModel for QuadrotorModel {
    fn nx(&self) -> usize {
        NX
    }

    fn nu(&self) -> usize {
        NU
    }

    fn cost(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let e = x - self.reference(k);
        let mut c = 0.0;
        for i in 0..NX {
            c += 0.5 * self.params.q_diag[i] * e[i] * e[i];
        }
        for i in 0..NU {
            c += 0.5 * self.params.r_diag[i] * u[i] * u[i];
        }
        c
    }

    fn cost_grad(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let e = x - self.reference(k);
        let gx = DVector::from_fn(NX, |i, _| self.params.q_diag[i] * e[i]);
        let gu = DVector::from_fn(NU, |i, _| self.params.r_diag[i] * u[i]);
        (gx, gu)
    }

    fn dynamics(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        Ok(x + self.xdot(k, x, u)? * self.params.dt)
    }

    fn dynamics_jac(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        let (cg, sg) = (x[6].cos(), x[6].sin());
        let (cb, sb) = (x[7].cos(), x[7].sin());
        let (ca, sa) = (x[8].cos(), x[8].sin());
        if cb.abs() < COS_BETA_MIN {
            return Err(EvalError::TrigSingularity { stage: k });
        }
        let tb = sb / cb;
        let (a, wx, wy) = (u[0], u[1], u[2]);
        let m = wx * cg + wy * sg;
        let mp = -wx * sg + wy * cg;
        let h1 = cg * sb * ca + sg * sa;
        let h2 = cg * sb * sa - sg * ca;
        let h3 = cg * cb;
        let dt = self.params.dt;

        let mut ja = DMatrix::<f64>::zeros(NX, NX);
        // Velocity integrators.
        ja[(0, 1)] = 1.0;
        ja[(2, 3)] = 1.0;
        ja[(4, 5)] = 1.0;
        // Accelerations a·h(γ, β, α).
        ja[(1, 6)] = a * (-sg * sb * ca + cg * sa);
        ja[(1, 7)] = a * (cg * cb * ca);
        ja[(1, 8)] = a * (-cg * sb * sa + sg * ca);
        ja[(3, 6)] = a * (-sg * sb * sa - cg * ca);
        ja[(3, 7)] = a * (cg * cb * sa);
        ja[(3, 8)] = a * h1;
        ja[(5, 6)] = a * (-sg * cb);
        ja[(5, 7)] = a * (-cg * sb);
        // Attitude kinematics.
        ja[(6, 6)] = mp / cb;
        ja[(6, 7)] = m * sb / (cb * cb);
        ja[(7, 6)] = -m;
        ja[(8, 6)] = mp * tb;
        ja[(8, 7)] = m / (cb * cb);

        let mut jb = DMatrix::<f64>::zeros(NX, NU);
        jb[(1, 0)] = h1;
        jb[(3, 0)] = h2;
        jb[(5, 0)] = h3;
        jb[(6, 1)] = cg / cb;
        jb[(6, 2)] = sg / cb;
        jb[(7, 1)] = -sg;
        jb[(7, 2)] = cg;
        jb[(8, 1)] = cg * tb;
        jb[(8, 2)] = sg * tb;
        jb[(8, 3)] = 1.0;

        Ok((DMatrix::identity(NX, NX) + ja * dt, jb * dt))
    }

    fn lagrangian_hessian(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<HessBlock, EvalError> {
        let (cg, sg) = (x[6].cos(), x[6].sin());
        let (cb, sb) = (x[7].cos(), x[7].sin());
        let (ca, sa) = (x[8].cos(), x[8].sin());
        if cb.abs() < COS_BETA_MIN {
            return Err(EvalError::TrigSingularity { stage: k });
        }
        let tb = sb / cb;
        let cb2 = cb * cb;
        let (a, wx, wy) = (u[0], u[1], u[2]);
        let m = wx * cg + wy * sg;
        let mp = -wx * sg + wy * cg;
        let h1 = cg * sb * ca + sg * sa;
        let h2 = cg * sb * sa - sg * ca;
        let h3 = cg * cb;
        let h1g = -sg * sb * ca + cg * sa;
        let h2g = -sg * sb * sa - cg * ca;
        let dt = self.params.dt;

        // Second derivatives of the dynamics rows, contracted with -λ·Δt.
        // Row r contributes -λ_r Δt ∇² ẋ_r; only the angle and angle-control
        // entries are nonzero (each row is linear in its own control).
        let mut q = DMatrix::<f64>::zeros(NX, NX);
        let mut s = DMatrix::<f64>::zeros(NU, NX);
        let mut add_q = |i: usize, j: usize, v: f64| {
            q[(i, j)] += v;
            if i != j {
                q[(j, i)] += v;
            }
        };

        // Row 1: a·h1.
        let l1 = -lambda[1] * dt;
        add_q(6, 6, l1 * a * -h1);
        add_q(6, 7, l1 * a * (-sg * cb * ca));
        add_q(6, 8, l1 * a * (sg * sb * sa + cg * ca));
        add_q(7, 7, l1 * a * (-cg * sb * ca));
        add_q(7, 8, l1 * a * (-cg * cb * sa));
        add_q(8, 8, l1 * a * -h1);
        s[(0, 6)] += l1 * h1g;
        s[(0, 7)] += l1 * (cg * cb * ca);
        s[(0, 8)] += l1 * (-cg * sb * sa + sg * ca);

        // Row 3: a·h2.
        let l3 = -lambda[3] * dt;
        add_q(6, 6, l3 * a * -h2);
        add_q(6, 7, l3 * a * (-sg * cb * sa));
        add_q(6, 8, l3 * a * h1g);
        add_q(7, 7, l3 * a * (-cg * sb * sa));
        add_q(7, 8, l3 * a * (cg * cb * ca));
        add_q(8, 8, l3 * a * -h2);
        s[(0, 6)] += l3 * h2g;
        s[(0, 7)] += l3 * (cg * cb * sa);
        s[(0, 8)] += l3 * h1;

        // Row 5: a·h3.
        let l5 = -lambda[5] * dt;
        add_q(6, 6, l5 * a * -h3);
        add_q(6, 7, l5 * a * (sg * sb));
        add_q(7, 7, l5 * a * -h3);
        s[(0, 6)] += l5 * (-sg * cb);
        s[(0, 7)] += l5 * (-cg * sb);

        // Row 6: m/cos β.
        let l6 = -lambda[6] * dt;
        add_q(6, 6, l6 * (-m / cb));
        add_q(6, 7, l6 * (mp * sb / cb2));
        add_q(7, 7, l6 * (m * (1.0 + sb * sb) / (cb2 * cb)));
        s[(1, 6)] += l6 * (-sg / cb);
        s[(2, 6)] += l6 * (cg / cb);
        s[(1, 7)] += l6 * (cg * sb / cb2);
        s[(2, 7)] += l6 * (sg * sb / cb2);

        // Row 7: mp.
        let l7 = -lambda[7] * dt;
        add_q(6, 6, l7 * -mp);
        s[(1, 6)] += l7 * -cg;
        s[(2, 6)] += l7 * -sg;

        // Row 8: m·tan β + ω_Z.
        let l8 = -lambda[8] * dt;
        add_q(6, 6, l8 * (-m * tb));
        add_q(6, 7, l8 * (mp / cb2));
        add_q(7, 7, l8 * (2.0 * m * sb / (cb2 * cb)));
        s[(1, 6)] += l8 * (-sg * tb);
        s[(2, 6)] += l8 * (cg * tb);
        s[(1, 7)] += l8 * (cg / cb2);
        s[(2, 7)] += l8 * (sg / cb2);

        for i in 0..NX {
            q[(i, i)] += self.params.q_diag[i];
        }
        let r = DMatrix::from_fn(NU, NU, |i, j| if i == j { self.params.r_diag[i] } else { 0.0 });
        Ok(HessBlock { q, s, r })
    }

    fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        let e = x - self.terminal_reference();
        let mut c = 0.0;
        for i in 0..NX {
            c += 0.5 * self.params.q_diag[i] * e[i] * e[i] / self.params.dt;
        }
        c
    }

    fn terminal_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let e = x - self.terminal_reference();
        DVector::from_fn(NX, |i, _| self.params.q_diag[i] * e[i] / self.params.dt)
    }

    fn terminal_hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(NX, NX, |i, j| {
            if i == j {
                self.params.q_diag[i] / self.params.dt
            } else {
                0.0
            }
        })
    }

    fn data_dim(&self) -> usize {
        NX
    }

    fn cost_data_cross(
        &self,
        _k: usize,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _lambda: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        // ∂²g/∂d∂x = -Q for data d = x^ref.
        let q = DMatrix::from_fn(NX, NX, |i, j| if i == j { -self.params.q_diag[i] } else { 0.0 });
        Ok((q, DMatrix::zeros(NX, NU)))
    }

    fn terminal_data_cross(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(NX, NX, |i, j| {
            if i == j {
                -self.params.q_diag[i] / self.params.dt
            } else {
                0.0
            }
        })
    }
}

/// Builds the tracking problem starting at rest at the origin.
pub fn quadrotor(params: QuadrotorParams) -> NlpOcp {
    let n = params.n;
    NlpOcp {
        model: Arc::new(QuadrotorModel::new(params)),
        n,
        x0: DVector::zeros(NX),
        initial: InitialCondition::Fixed,
    }
}

/// Builds the tracking problem with a shifted initial state and/or a shifted
/// terminal reference, for boundary-perturbation experiments.
pub fn quadrotor_perturbed(
    params: QuadrotorParams,
    dx0: DVector<f64>,
    dterm: DVector<f64>,
) -> NlpOcp {
    let n = params.n;
    let mut model = QuadrotorModel::new(params);
    model.terminal_ref_offset = dterm;
    NlpOcp {
        model: Arc::new(model),
        n,
        x0: dx0,
        initial: InitialCondition::Fixed,
    }
}
