//! Thin-plate temperature control.
//!
//! A square plate on `Ω = [0,1]²` with temperature field `x(w,t)` obeying
//!
//! ```text
//! ∂x/∂t = −Δx + (2h_c/κt_z)(x − T̄) + (2εσ/κt_z)(x⁴ − T̄⁴) − u/(κt_z)
//! ```
//!
//! with Dirichlet boundary value `T̄` (the equation is implemented with this
//! sign pattern as written). Space is discretized on an `M×M` mesh with the
//! 5-point-stencil Laplacian on the `(M−2)²` interior nodes, time by explicit
//! Euler with step `Δt`. Both state and control live on the interior nodes.
//!
//! Stage cost is the spatial quadrature
//! `Δt h² Σ_i (½(x_i − d_i)² + ½ r u_i²)` with cell area `h²`; the terminal
//! cost is zero. The desired temperature is sinusoidal in time and space:
//! `d_i(k) = T̄ + A sin(2πk/N) sin(π w_1) sin(π w_2)` with amplitude
//! `A = 50` at node position `(w_1, w_2)`.
//!
//! The external data vector of stage `k` is `d_k`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::EvalError;
use crate::ocp::{HessBlock, InitialCondition, NlpOcp, OcpModel};

#[derive(Debug, Clone)]
pub struct ThinPlateParams {
    pub n: usize,
    /// Mesh points per side (10 in the benchmark).
    pub mesh: usize,
    pub dt: f64,
    /// Control cost weight.
    pub r: f64,
    pub kappa: f64,
    pub t_z: f64,
    pub h_c: f64,
    pub epsilon: f64,
    pub sigma: f64,
    /// Ambient and boundary temperature T̄.
    pub t_amb: f64,
    /// Amplitude of the sinusoidal desired-temperature profile.
    pub target_amplitude: f64,
}

impl ThinPlateParams {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            mesh: 10,
            dt: 10.0,
            r: 0.1,
            kappa: 400.0,
            t_z: 0.01,
            h_c: 1.0,
            epsilon: 0.5,
            sigma: 5.67e-8,
            t_amb: 300.0,
            target_amplitude: 50.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThinPlateModel {
    pub params: ThinPlateParams,
    /// Interior nodes per side.
    side: usize,
    /// Mesh spacing.
    h: f64,
    /// Convection coefficient `2h_c/(κ t_z)`.
    c_conv: f64,
    /// Radiation coefficient `2εσ/(κ t_z)`.
    c_rad: f64,
    /// Control coefficient `1/(κ t_z)`.
    c_ctl: f64,
}

impl ThinPlateModel {
    pub fn new(params: ThinPlateParams) -> Self {
        assert!(params.mesh >= 3, "mesh must be at least 3x3");
        let side = params.mesh - 2;
        let h = 1.0 / (params.mesh - 1) as f64;
        let kt = params.kappa * params.t_z;
        Self {
            side,
            h,
            c_conv: 2.0 * params.h_c / kt,
            c_rad: 2.0 * params.epsilon * params.sigma / kt,
            c_ctl: 1.0 / kt,
            params,
        }
    }

    pub fn nodes(&self) -> usize {
        self.side * self.side
    }

    /// Quadrature weight `Δt h²` shared by all cost terms.
    fn weight(&self) -> f64 {
        self.params.dt * self.h * self.h
    }

    /// Desired temperature at absolute stage `k`.
    pub fn desired(&self, k: usize) -> DVector<f64> {
        let phase = (2.0 * PI * k as f64 / self.params.n as f64).sin();
        DVector::from_fn(self.nodes(), |i, _| {
            let (row, col) = (i / self.side, i % self.side);
            let w1 = (row + 1) as f64 * self.h;
            let w2 = (col + 1) as f64 * self.h;
            self.params.t_amb
                + self.params.target_amplitude * phase * (PI * w1).sin() * (PI * w2).sin()
        })
    }

    /// 5-point-stencil Laplacian with Dirichlet value T̄ off the interior.
    fn laplacian(&self, x: &DVector<f64>) -> DVector<f64> {
        let s = self.side;
        let at = |r: isize, c: isize| -> f64 {
            if r < 0 || c < 0 || r >= s as isize || c >= s as isize {
                self.params.t_amb
            } else {
                x[r as usize * s + c as usize]
            }
        };
        DVector::from_fn(self.nodes(), |i, _| {
            let (r, c) = ((i / s) as isize, (i % s) as isize);
            (at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1) - 4.0 * at(r, c))
                / (self.h * self.h)
        })
    }

    /// Continuous-time right-hand side of the PDE at the interior nodes.
    pub fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let lap = self.laplacian(x);
        let tb = self.params.t_amb;
        DVector::from_fn(self.nodes(), |i, _| {
            -lap[i] + self.c_conv * (x[i] - tb) + self.c_rad * (x[i].powi(4) - tb.powi(4))
                - self.c_ctl * u[i]
        })
    }
}

impl OcpModel for ThinPlateModel {
    fn nx(&self) -> usize {
        self.nodes()
    }

    fn nu(&self) -> usize {
        self.nodes()
    }

    fn cost(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let d = self.desired(k);
        let w = self.weight();
        let mut c = 0.0;
        for i in 0..self.nodes() {
            c += w * (0.5 * (x[i] - d[i]).powi(2) + 0.5 * self.params.r * u[i].powi(2));
        }
        c
    }

    fn cost_grad(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let d = self.desired(k);
        let w = self.weight();
        ((x - d) * w, u * (w * self.params.r))
    }

    fn dynamics(&self, _k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        Ok(x + self.rhs(x, u) * self.params.dt)
    }

    fn dynamics_jac(
        &self,
        _k: usize,
        x: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        let n = self.nodes();
        let s = self.side;
        let dt = self.params.dt;
        let h2 = self.h * self.h;
        let mut a = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            let (r, c) = (i / s, i % s);
            // -Δ stencil: +4/h² on the diagonal, -1/h² for interior neighbors.
            a[(i, i)] += dt * (4.0 / h2 + self.c_conv + 4.0 * self.c_rad * x[i].powi(3));
            let mut nb = |rr: isize, cc: isize| {
                if rr >= 0 && cc >= 0 && rr < s as isize && cc < s as isize {
                    a[(i, rr as usize * s + cc as usize)] -= dt / h2;
                }
            };
            nb(r as isize - 1, c as isize);
            nb(r as isize + 1, c as isize);
            nb(r as isize, c as isize - 1);
            nb(r as isize, c as isize + 1);
        }
        let b = DMatrix::identity(n, n) * (-dt * self.c_ctl);
        Ok((a, b))
    }

    fn lagrangian_hessian(
        &self,
        _k: usize,
        x: &DVector<f64>,
        _u: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<HessBlock, EvalError> {
        let n = self.nodes();
        let w = self.weight();
        let dt = self.params.dt;
        let mut q = DMatrix::<f64>::identity(n, n) * w;
        for i in 0..n {
            // Radiation is the only nonlinearity: ∂²f_i/∂x_i² = 12 Δt c_rad x_i².
            q[(i, i)] -= lambda[i] * dt * 12.0 * self.c_rad * x[i].powi(2);
        }
        Ok(HessBlock {
            q,
            s: DMatrix::zeros(n, n),
            r: DMatrix::identity(n, n) * (w * self.params.r),
        })
    }

    fn terminal_cost(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn terminal_grad(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.nodes())
    }

    fn terminal_hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.nodes(), self.nodes())
    }

    fn data_dim(&self) -> usize {
        self.nodes()
    }

    fn cost_data_cross(
        &self,
        _k: usize,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _lambda: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        let n = self.nodes();
        // ∂²g/∂d∂x = -Δt h² I for data d = desired temperature.
        Ok((
            DMatrix::identity(n, n) * (-self.weight()),
            DMatrix::zeros(n, n),
        ))
    }
}

/// Builds the plate problem starting from the uniform ambient temperature.
pub fn thin_plate(params: ThinPlateParams) -> NlpOcp {
    let model = ThinPlateModel::new(params);
    let n = model.params.n;
    let x0 = DVector::from_element(model.nodes(), model.params.t_amb);
    NlpOcp {
        model: Arc::new(model),
        n,
        x0,
        initial: InitialCondition::Fixed,
    }
}
