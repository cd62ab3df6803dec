//! Structured linear-quadratic optimal control.
//!
//! Stage costs follow the convention
//! `g_k(x,u) = (x;u)^T H_k (x;u) + (r_k; s_k)^T (x;u)` with
//! `H_k = [[Q_k, S_k^T], [S_k, R_k]]` and no 1/2 factor, so gradients are
//! `2 H_k (x;u) + (r_k; s_k)`. Dynamics are `x_{k+1} = A_k x_k + B_k u_k + v_k`.
//!
//! A problem may additionally carry data-coupling blocks `D_k = [D_{k1} D_{k2}]`,
//! `C_k`, and a fixed direction `l`, in which case it is a sensitivity problem
//! whose objective includes the cross terms `2 l_k^T (D_{k1} x_k + D_{k2} u_k)`
//! and whose dynamics carry the drift `C_k l_k`.

mod convexify;
mod dense;
mod io;
mod riccati;
pub mod testgen;

pub use convexify::convexify;
pub use dense::dense_kkt_solve;
pub use io::{lq_problem_from_json, lq_problem_to_json};
pub use riccati::{lq_solve, lq_solve_with, riccati_factor, stagewise_dual, RiccatiFactorsOf};

use nalgebra::{DMatrix, DVector};

use crate::error::{LqError, StructuralError};
use crate::traj::Scalar;

/// Quadratic/affine data for one stage `k < N`.
#[derive(Debug, Clone)]
pub struct LqStageOf<T: Scalar> {
    pub q: DMatrix<T>,
    pub s: DMatrix<T>,
    pub r: DMatrix<T>,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    /// Dynamics drift `v_k`.
    pub v: DVector<T>,
    /// Linear cost term on the state.
    pub r_lin: DVector<T>,
    /// Linear cost term on the control.
    pub s_lin: DVector<T>,
}

impl<T: Scalar> LqStageOf<T> {
    pub fn zeros(nx: usize, nu: usize) -> Self {
        Self {
            q: DMatrix::zeros(nx, nx),
            s: DMatrix::zeros(nu, nx),
            r: DMatrix::zeros(nu, nu),
            a: DMatrix::zeros(nx, nx),
            b: DMatrix::zeros(nx, nu),
            v: DVector::zeros(nx),
            r_lin: DVector::zeros(nx),
            s_lin: DVector::zeros(nu),
        }
    }
}

/// Data-coupling blocks for one stage of a sensitivity problem.
#[derive(Debug, Clone)]
pub struct CouplingStageOf<T: Scalar> {
    /// `D_{k1}`, shape `n_d × n_x`.
    pub d1: DMatrix<T>,
    /// `D_{k2}`, shape `n_d × n_u`.
    pub d2: DMatrix<T>,
    /// `C_k`, shape `n_x × n_d`.
    pub c: DMatrix<T>,
    /// Direction component `l_k`.
    pub l: DVector<T>,
}

/// Full data coupling `{D_k, C_k, l_k}` with terminal block `D_N`, `l_N`.
/// The initial direction `l_{-1}` is the problem's `x0`.
#[derive(Debug, Clone)]
pub struct CouplingOf<T: Scalar> {
    pub stages: Vec<CouplingStageOf<T>>,
    pub dn: DMatrix<T>,
    pub ln: DVector<T>,
}

/// Linear-quadratic OCP over horizon `[0, N]`.
#[derive(Debug, Clone)]
pub struct LqProblemOf<T: Scalar> {
    pub n: usize,
    pub nx: usize,
    pub nu: usize,
    pub stages: Vec<LqStageOf<T>>,
    pub qn: DMatrix<T>,
    pub rn_lin: DVector<T>,
    /// Initial state (ignored when `free_initial` is set).
    pub x0: DVector<T>,
    /// When set, the constraint `x_0 = x0` is dropped and `x_0` is optimized;
    /// `λ_{-1}` is then identically zero. Used by consensus subproblems.
    pub free_initial: bool,
    pub coupling: Option<CouplingOf<T>>,
}

impl<T: Scalar> LqProblemOf<T> {
    pub fn zeros(n: usize, nx: usize, nu: usize) -> Self {
        Self {
            n,
            nx,
            nu,
            stages: (0..n).map(|_| LqStageOf::zeros(nx, nu)).collect(),
            qn: DMatrix::zeros(nx, nx),
            rn_lin: DVector::zeros(nx),
            x0: DVector::zeros(nx),
            free_initial: false,
            coupling: None,
        }
    }

    pub fn validate(&self) -> Result<(), StructuralError> {
        if self.stages.len() != self.n {
            return Err(StructuralError::PartitionMismatch(format!(
                "{} stages for horizon {}",
                self.stages.len(),
                self.n
            )));
        }
        for (k, st) in self.stages.iter().enumerate() {
            let dims = [
                ("Q", st.q.nrows(), self.nx, st.q.ncols(), self.nx),
                ("S", st.s.nrows(), self.nu, st.s.ncols(), self.nx),
                ("R", st.r.nrows(), self.nu, st.r.ncols(), self.nu),
                ("A", st.a.nrows(), self.nx, st.a.ncols(), self.nx),
                ("B", st.b.nrows(), self.nx, st.b.ncols(), self.nu),
            ];
            for (name, r, er, c, ec) in dims {
                if r != er || c != ec {
                    return Err(StructuralError::PartitionMismatch(format!(
                        "{name} at stage {k} is {r}x{c}, expected {er}x{ec}"
                    )));
                }
            }
        }
        if self.qn.nrows() != self.nx || self.qn.ncols() != self.nx {
            return Err(StructuralError::PartitionMismatch("QN dimension".into()));
        }
        Ok(())
    }

    /// Effective linear state cost at stage `k`, folding in `2 D_{k1}^T l_k`.
    pub fn r_lin_eff(&self, k: usize) -> DVector<T> {
        let mut r = self.stages[k].r_lin.clone();
        if let Some(c) = &self.coupling {
            let cs = &c.stages[k];
            r += cs.d1.transpose() * &cs.l * (T::one() + T::one());
        }
        r
    }

    /// Effective linear control cost at stage `k`, folding in `2 D_{k2}^T l_k`.
    pub fn s_lin_eff(&self, k: usize) -> DVector<T> {
        let mut s = self.stages[k].s_lin.clone();
        if let Some(c) = &self.coupling {
            let cs = &c.stages[k];
            s += cs.d2.transpose() * &cs.l * (T::one() + T::one());
        }
        s
    }

    /// Effective drift at stage `k`, folding in `C_k l_k`.
    pub fn v_eff(&self, k: usize) -> DVector<T> {
        let mut v = self.stages[k].v.clone();
        if let Some(c) = &self.coupling {
            let cs = &c.stages[k];
            v += &cs.c * &cs.l;
        }
        v
    }

    /// Effective terminal linear cost, folding in `2 D_N^T l_N`.
    pub fn rn_lin_eff(&self) -> DVector<T> {
        let mut r = self.rn_lin.clone();
        if let Some(c) = &self.coupling {
            r += c.dn.transpose() * &c.ln * (T::one() + T::one());
        }
        r
    }

    /// Smallest eigenvalue of the reduced Hessian `Z^T H Z`, where `Z` is an
    /// orthonormal null-space basis of the constraint Jacobian and
    /// `H = diag(H_0, ..., H_N)` are the stored quadratic blocks.
    ///
    /// Dense computation; intended for instances small enough for an
    /// eigendecomposition of `G^T G`.
    pub fn reduced_hessian_min_eig(&self) -> T {
        let nz = (self.n + 1) * self.nx + self.n * self.nu;
        let ncon = (self.n + 1) * self.nx;
        let z_off = |k: usize| k * (self.nx + self.nu);
        let u_off = |k: usize| k * (self.nx + self.nu) + self.nx;

        // Constraint Jacobian G of Definition 1 (initial row + dynamics rows).
        let mut g = DMatrix::<T>::zeros(ncon, nz);
        for i in 0..self.nx {
            g[(i, i)] = T::one();
        }
        for k in 0..self.n {
            let row = (k + 1) * self.nx;
            let st = &self.stages[k];
            for i in 0..self.nx {
                for j in 0..self.nx {
                    g[(row + i, z_off(k) + j)] = -st.a[(i, j)];
                    g[(row + i, z_off(k + 1) + j)] = if i == j { T::one() } else { T::zero() };
                }
                for j in 0..self.nu {
                    g[(row + i, u_off(k) + j)] = -st.b[(i, j)];
                }
            }
        }

        // Null space of G: the n_u*N eigenvectors of G^T G with the smallest
        // eigenvalues (the null dimension is known exactly).
        let gtg = g.transpose() * &g;
        let eig = gtg.symmetric_eigen();
        let nnull = self.n * self.nu;
        let mut idx: Vec<usize> = (0..nz).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut z = DMatrix::<T>::zeros(nz, nnull);
        for (col, &i) in idx.iter().take(nnull).enumerate() {
            z.set_column(col, &eig.eigenvectors.column(i));
        }

        // Block-diagonal Hessian H.
        let mut h = DMatrix::<T>::zeros(nz, nz);
        for k in 0..self.n {
            let st = &self.stages[k];
            h.view_mut((z_off(k), z_off(k)), (self.nx, self.nx)).copy_from(&st.q);
            h.view_mut((u_off(k), z_off(k)), (self.nu, self.nx)).copy_from(&st.s);
            h.view_mut((z_off(k), u_off(k)), (self.nx, self.nu))
                .copy_from(&st.s.transpose());
            h.view_mut((u_off(k), u_off(k)), (self.nu, self.nu)).copy_from(&st.r);
        }
        h.view_mut((z_off(self.n), z_off(self.n)), (self.nx, self.nx))
            .copy_from(&self.qn);

        let reh = z.transpose() * h * z;
        let vals = reh.symmetric_eigen().eigenvalues;
        vals.iter().cloned().fold(vals[0], |m, v| m.min(v))
    }
}

/// Symmetrize in place: `m ← (m + m^T) / 2`.
pub(crate) fn symmetrize<T: Scalar>(m: &mut DMatrix<T>) {
    let half = T::from_subset(&0.5);
    let mt = m.transpose();
    *m += mt;
    *m *= half;
}

pub(crate) fn cholesky_or<T: Scalar>(
    m: &DMatrix<T>,
    err: LqError,
) -> Result<nalgebra::Cholesky<T, nalgebra::Dyn>, LqError> {
    m.clone().cholesky().ok_or(err)
}
