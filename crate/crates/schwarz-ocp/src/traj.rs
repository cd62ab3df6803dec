//! Primal-dual trajectory containers, stagewise norms, and the
//! restriction/concatenation operators used by the decomposition loop.
//!
//! A trajectory stores the full iterate `w = (x_{0:N}, u_{0:N-1}, λ_{-1:N-1})`
//! ordered by stage. The dual associated with the initial condition, `λ_{-1}`,
//! is a first-class block: dual slot `j` stores `λ_{j-1}`.

use nalgebra::{DVector, RealField};
use std::io::Write;

use crate::error::StructuralError;

/// Scalar type for the generic math core.
pub trait Scalar: RealField + Copy {}
impl<T: RealField + Copy> Scalar for T {}

/// Full primal-dual iterate over the horizon `[0, N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOf<T: Scalar> {
    /// Horizon length (number of control stages).
    pub n: usize,
    /// States `x_0..x_N`, each of length `n_x`.
    pub x: Vec<DVector<T>>,
    /// Controls `u_0..u_{N-1}`, each of length `n_u`.
    pub u: Vec<DVector<T>>,
    /// Duals `λ_{-1}..λ_{N-1}`: slot `j` stores `λ_{j-1}`.
    pub lambda: Vec<DVector<T>>,
}

impl<T: Scalar> TrajectoryOf<T> {
    pub fn zeros(n: usize, nx: usize, nu: usize) -> Self {
        assert!(n >= 1, "horizon must be at least 1");
        Self {
            n,
            x: (0..=n).map(|_| DVector::zeros(nx)).collect(),
            u: (0..n).map(|_| DVector::zeros(nu)).collect(),
            lambda: (0..=n).map(|_| DVector::zeros(nx)).collect(),
        }
    }

    pub fn nx(&self) -> usize {
        self.x[0].len()
    }

    pub fn nu(&self) -> usize {
        self.u[0].len()
    }

    /// Dual `λ_k` for `k ∈ [-1, N-1]`.
    pub fn lambda_at(&self, k: isize) -> &DVector<T> {
        &self.lambda[(k + 1) as usize]
    }

    pub fn lambda_at_mut(&mut self, k: isize) -> &mut DVector<T> {
        &mut self.lambda[(k + 1) as usize]
    }

    /// Checks block counts and per-stage dimensions.
    pub fn validate(&self) -> Result<(), StructuralError> {
        if self.x.len() != self.n + 1 || self.u.len() != self.n || self.lambda.len() != self.n + 1 {
            return Err(StructuralError::BlockCount {
                n: self.n,
                x: self.x.len(),
                u: self.u.len(),
                lambda: self.lambda.len(),
            });
        }
        let nx = self.nx();
        let nu = self.nu();
        for (k, xk) in self.x.iter().enumerate() {
            if xk.len() != nx {
                return Err(StructuralError::StageDim { block: "x", stage: k as isize, expected: nx, got: xk.len() });
            }
        }
        for (k, uk) in self.u.iter().enumerate() {
            if uk.len() != nu {
                return Err(StructuralError::StageDim { block: "u", stage: k as isize, expected: nu, got: uk.len() });
            }
        }
        for (j, lk) in self.lambda.iter().enumerate() {
            if lk.len() != nx {
                return Err(StructuralError::StageDim { block: "lambda", stage: j as isize - 1, expected: nx, got: lk.len() });
            }
        }
        Ok(())
    }

    /// Stagewise max ℓ2-norm: `max_k max(‖x_k‖, ‖u_k‖, ‖λ_k‖)` over every
    /// block present in the trajectory, including `λ_{-1}`.
    pub fn norm_w(&self) -> T {
        let mut m = T::zero();
        for xk in &self.x {
            m = m.max(xk.norm());
        }
        for uk in &self.u {
            m = m.max(uk.norm());
        }
        for lk in &self.lambda {
            m = m.max(lk.norm());
        }
        m
    }

    /// `norm_w(self - other)`; both must have identical shapes.
    pub fn norm_w_diff(&self, other: &Self) -> T {
        assert_eq!(self.n, other.n);
        let mut m = T::zero();
        for (a, b) in self.x.iter().zip(&other.x) {
            m = m.max((a - b).norm());
        }
        for (a, b) in self.u.iter().zip(&other.u) {
            m = m.max((a - b).norm());
        }
        for (a, b) in self.lambda.iter().zip(&other.lambda) {
            m = m.max((a - b).norm());
        }
        m
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            n: self.n,
            x: self.x.iter().map(|v| v * c).collect(),
            u: self.u.iter().map(|v| v * c).collect(),
            lambda: self.lambda.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
            u: self.u.iter().zip(&other.u).map(|(a, b)| a + b).collect(),
            lambda: self.lambda.iter().zip(&other.lambda).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    /// Slice to the window `[n1, n2]`: states `x_{n1..n2}`, controls
    /// `u_{n1..n2-1}`, duals `λ_{n1-1..n2-1}`. The result is itself a
    /// trajectory of horizon `n2 - n1`.
    pub fn slice(&self, n1: usize, n2: usize) -> Self {
        assert!(n1 < n2 && n2 <= self.n);
        Self {
            n: n2 - n1,
            x: self.x[n1..=n2].to_vec(),
            u: self.u[n1..n2].to_vec(),
            lambda: self.lambda[n1..=n2].to_vec(),
        }
    }

    /// Writes the trajectory as CSV with header
    /// `stage,x_0..x_{nx-1},u_0..u_{nu-1},lambda_0..lambda_{nx-1}`.
    /// One row per stage `0..N`; the control and dual cells are left empty at
    /// stage `N`. The dual cells on row `k` hold slot `k`, i.e. `λ_{k-1}`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()>
    where
        T: std::fmt::Display,
    {
        let nx = self.nx();
        let nu = self.nu();
        let mut header = vec!["stage".to_string()];
        header.extend((0..nx).map(|i| format!("x_{i}")));
        header.extend((0..nu).map(|i| format!("u_{i}")));
        header.extend((0..nx).map(|i| format!("lambda_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for k in 0..=self.n {
            let mut row = vec![k.to_string()];
            row.extend(self.x[k].iter().map(|v| v.to_string()));
            if k < self.n {
                row.extend(self.u[k].iter().map(|v| v.to_string()));
                row.extend(self.lambda[k].iter().map(|v| v.to_string()));
            } else {
                row.extend(std::iter::repeat(String::new()).take(nu + nx));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Solution of one subproblem over the expanded window `[n1, n2]`, before
/// the overlap regions are discarded.
#[derive(Debug, Clone)]
pub struct SubTrajectoryOf<T: Scalar> {
    /// Subdomain index.
    pub i: usize,
    /// Left expanded boundary `n_i^1`.
    pub n1: usize,
    /// Right expanded boundary `n_i^2`.
    pub n2: usize,
    /// Payload `(λ_{n1-1}; w_{n1:n2-1}; x_{n2})`, stored as a trajectory of
    /// horizon `n2 - n1` whose dual slot 0 is `λ_{n1-1}`.
    pub traj: TrajectoryOf<T>,
}

impl<T: Scalar> SubTrajectoryOf<T> {
    /// State at absolute stage `k ∈ [n1, n2]`.
    pub fn x_at(&self, k: usize) -> &DVector<T> {
        &self.traj.x[k - self.n1]
    }

    /// Dual at absolute stage `k ∈ [n1 - 1, n2 - 1]`.
    pub fn lambda_at(&self, k: isize) -> &DVector<T> {
        self.traj.lambda_at(k - self.n1 as isize)
    }
}

/// Boundary data `w_{[-i]} = (x_{n_i^1}; w_{n_i^2})` feeding subproblem `i`.
/// The terminal block is absent for the last subdomain.
#[derive(Debug, Clone)]
pub struct BoundaryDataOf<T: Scalar> {
    pub i: usize,
    /// `x_{n_i^1}`, the initial condition of the subproblem.
    pub x_init: DVector<T>,
    /// `(x̄, ū, λ̄)` at stage `n_i^2`; `None` iff this is the last subdomain.
    pub w_term: Option<TerminalDataOf<T>>,
}

#[derive(Debug, Clone)]
pub struct TerminalDataOf<T: Scalar> {
    pub x: DVector<T>,
    pub u: DVector<T>,
    pub lambda: DVector<T>,
}

impl<T: Scalar> BoundaryDataOf<T> {
    /// Stagewise norm of the boundary data, taking the max over the blocks
    /// that are present.
    pub fn norm_w(&self) -> T {
        let mut m = self.x_init.norm();
        if let Some(t) = &self.w_term {
            m = m.max(t.x.norm()).max(t.u.norm()).max(t.lambda.norm());
        }
        m
    }
}
