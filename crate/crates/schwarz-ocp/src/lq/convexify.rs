//! Backward convexification of a reduced-Hessian-positive problem.
//!
//! Rewrites the objective stage by stage so that every new Hessian block
//! `H̃_k` is positive definite while the problem is unchanged on the feasible
//! manifold. With `Q̄_{N} = Q_N - βI` and moving backward:
//!
//! ```text
//! Q̂_k = Q_k + A_k^T Q̄_{k+1} A_k        S̃_k = S_k + B_k^T Q̄_{k+1} A_k
//! R̃_k = R_k + B_k^T Q̄_{k+1} B_k        Q̃_k = S̃_k^T R̃_k^{-1} S̃_k + βI
//! Q̄_k = Q̂_k - Q̃_k
//! ```
//!
//! The new stage blocks are `(Q̃_k, S̃_k, R̃_k)` and the terminal block `βI`.
//! Data-coupling and linear terms pick up matching corrections
//! `D̃_{k1} = D_{k1} + C_k^T Q̄_{k+1} A_k`, `D̃_{k2} = D_{k2} + C_k^T Q̄_{k+1} B_k`,
//! `r̃_k = r_k + 2 A_k^T Q̄_{k+1} v_k`, and `s̃_k = s_k + 2 B_k^T Q̄_{k+1} v_k`,
//! which keep the objective difference a telescoping sum of
//! `x_k^T Q̄_k x_k` terms along feasible trajectories. Primal solutions are
//! preserved exactly; multipliers shift by `λ̃_k = λ_k + 2 Q̄_{k+1} x_{k+1}`.
//!
//! `β` must lie in `(0, γ_H)` where `γ_H` is the smallest eigenvalue over
//! the reduced stage Hessians; outside that range the `R̃_k` factorization
//! breaks down.

use nalgebra::DMatrix;

use crate::error::LqError;
use crate::lq::{cholesky_or, symmetrize, LqProblemOf};
use crate::traj::Scalar;

/// Returns the convexified problem and the shift sequence `Q̄_0, ..., Q̄_N`.
pub fn convexify<T: Scalar>(
    prob: &LqProblemOf<T>,
    beta: T,
) -> Result<(LqProblemOf<T>, Vec<DMatrix<T>>), LqError> {
    prob.validate()?;
    let n = prob.n;
    let nx = prob.nx;
    let two = T::one() + T::one();
    let beta_eye = DMatrix::<T>::identity(nx, nx) * beta;

    let mut out = prob.clone();
    let mut q_bars = vec![DMatrix::<T>::zeros(0, 0); n + 1];
    q_bars[n] = &prob.qn - &beta_eye;
    out.qn = beta_eye.clone();

    for k in (0..n).rev() {
        let st = &prob.stages[k];
        let qb = &q_bars[k + 1];

        let mut q_hat = &st.q + st.a.transpose() * qb * &st.a;
        symmetrize(&mut q_hat);
        let s_new = &st.s + st.b.transpose() * qb * &st.a;
        let mut r_new = &st.r + st.b.transpose() * qb * &st.b;
        symmetrize(&mut r_new);
        let r_chol = cholesky_or(&r_new, LqError::ConvexifyBreakdown(k))?;

        let mut q_new = s_new.transpose() * r_chol.solve(&s_new) + &beta_eye;
        symmetrize(&mut q_new);
        let mut q_bar = &q_hat - &q_new;
        symmetrize(&mut q_bar);

        let ost = &mut out.stages[k];
        ost.r_lin = &st.r_lin + st.a.transpose() * qb * &st.v * two;
        ost.s_lin = &st.s_lin + st.b.transpose() * qb * &st.v * two;
        ost.q = q_new;
        ost.s = s_new;
        ost.r = r_new;
        if let Some(coupling) = &mut out.coupling {
            let base = &prob.coupling.as_ref().unwrap().stages[k];
            let cs = &mut coupling.stages[k];
            cs.d1 = &base.d1 + base.c.transpose() * qb * &st.a;
            cs.d2 = &base.d2 + base.c.transpose() * qb * &st.b;
        }
        q_bars[k] = q_bar;
    }

    Ok((out, q_bars))
}
