//! Riccati factorization and structured solve.
//!
//! Backward pass over `k = N-1, ..., 0` with value function
//! `V_k(x) = x^T K_k x + 2 c_k^T x + const`:
//!
//! ```text
//! K_N = Q_N,                      c_N = r_N / 2
//! W_k = R_k + B_k^T K_{k+1} B_k
//! P_k = -W_k^{-1} (B_k^T K_{k+1} A_k + S_k)
//! E_k = A_k + B_k P_k
//! K_k = Q_k + A_k^T K_{k+1} A_k
//!       - (B_k^T K_{k+1} A_k + S_k)^T W_k^{-1} (B_k^T K_{k+1} A_k + S_k)
//! d_k = -W_k^{-1} (B_k^T K_{k+1} v_k + B_k^T c_{k+1} + s_k / 2)
//! c_k = P_k^T R_k d_k + S_k^T d_k + r_k / 2 + P_k^T s_k / 2
//!       + E_k^T K_{k+1} (B_k d_k + v_k) + E_k^T c_{k+1}
//! ```
//!
//! Each `W_k` must be positive definite; this is implied by a positive
//! definite reduced Hessian. The forward pass rolls out `u_k = P_k x_k + d_k`
//! and the dual pass reads the multipliers off the value-function gradient,
//! `λ_{k-1} = -∇V_k(x_k)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::LqError;
use crate::lq::{cholesky_or, symmetrize, LqProblemOf};
use crate::traj::{Scalar, TrajectoryOf};

/// Output of the backward Riccati pass.
#[derive(Debug, Clone)]
pub struct RiccatiFactorsOf<T: Scalar> {
    /// Cost-to-go matrices `K_0, ..., K_N`.
    pub k: Vec<DMatrix<T>>,
    /// Cholesky factors of `W_0, ..., W_{N-1}`.
    pub w: Vec<Cholesky<T, Dyn>>,
    /// Feedback gains `P_0, ..., P_{N-1}`.
    pub p: Vec<DMatrix<T>>,
    /// Closed-loop maps `E_k = A_k + B_k P_k`.
    pub e: Vec<DMatrix<T>>,
    /// Affine value terms `c_0, ..., c_N`.
    pub c: Vec<DVector<T>>,
    /// Feedforward controls `d_0, ..., d_{N-1}`.
    pub d: Vec<DVector<T>>,
}

/// Runs the backward Riccati pass on `p`.
pub fn riccati_factor<T: Scalar>(prob: &LqProblemOf<T>) -> Result<RiccatiFactorsOf<T>, LqError> {
    prob.validate()?;
    let n = prob.n;
    let half = T::from_subset(&0.5);

    let mut ks = vec![DMatrix::zeros(0, 0); n + 1];
    let mut cs = vec![DVector::zeros(0); n + 1];
    let mut ws = Vec::with_capacity(n);
    let mut ps = vec![DMatrix::zeros(0, 0); n];
    let mut es = vec![DMatrix::zeros(0, 0); n];
    let mut ds = vec![DVector::zeros(0); n];

    ks[n] = prob.qn.clone();
    cs[n] = prob.rn_lin_eff() * half;

    for k in (0..n).rev() {
        let st = &prob.stages[k];
        let knext = &ks[k + 1];
        let cnext = &cs[k + 1];
        let v = prob.v_eff(k);
        let r_lin = prob.r_lin_eff(k);
        let s_lin = prob.s_lin_eff(k);

        let bk = st.b.transpose() * knext;
        let mut w = &st.r + &bk * &st.b;
        symmetrize(&mut w);
        let w_chol = cholesky_or(&w, LqError::IndefiniteW(k))?;

        let g = &bk * &st.a + &st.s;
        let p_gain = -w_chol.solve(&g);
        let e = &st.a + &st.b * &p_gain;
        let mut knew = &st.q + st.a.transpose() * knext * &st.a + g.transpose() * &p_gain;
        symmetrize(&mut knew);

        let d = -w_chol.solve(&(&bk * &v + st.b.transpose() * cnext + &s_lin * half));
        let c = p_gain.transpose() * (&st.r * &d + &s_lin * half)
            + st.s.transpose() * &d
            + &r_lin * half
            + e.transpose() * (knext * (&st.b * &d + &v) + cnext);

        ks[k] = knew;
        cs[k] = c;
        ps[k] = p_gain;
        es[k] = e;
        ds[k] = d;
        ws.push(w_chol);
    }
    ws.reverse();

    Ok(RiccatiFactorsOf { k: ks, w: ws, p: ps, e: es, c: cs, d: ds })
}

/// Solves `prob` with precomputed factors: forward rollout of the affine
/// policy, then value-function gradients for the multipliers.
pub fn lq_solve_with<T: Scalar>(
    prob: &LqProblemOf<T>,
    f: &RiccatiFactorsOf<T>,
) -> Result<TrajectoryOf<T>, LqError> {
    let n = prob.n;
    let two = T::one() + T::one();
    let mut traj = TrajectoryOf::zeros(n, prob.nx, prob.nu);

    traj.x[0] = if prob.free_initial {
        let k0 = cholesky_or(&f.k[0], LqError::IndefiniteInitial)?;
        -k0.solve(&f.c[0])
    } else {
        prob.x0.clone()
    };
    for k in 0..n {
        traj.u[k] = &f.p[k] * &traj.x[k] + &f.d[k];
        traj.x[k + 1] = &prob.stages[k].a * &traj.x[k] + &prob.stages[k].b * &traj.u[k]
            + prob.v_eff(k);
    }

    // Multipliers are the negative value-function gradients,
    // λ_{k-1} = -∇V_k(x_k) = -(2 K_k x_k + 2 c_k). This is equivalent to
    // backward substitution of the stationarity rows but stays stable for
    // stiff dynamics, where substitution amplifies roundoff by ‖A_k‖ per
    // stage.
    for k in 0..=n {
        *traj.lambda_at_mut(k as isize - 1) = -(&f.k[k] * &traj.x[k] + &f.c[k]) * two;
    }
    Ok(traj)
}

/// Factors and solves `prob` in one call.
pub fn lq_solve<T: Scalar>(prob: &LqProblemOf<T>) -> Result<TrajectoryOf<T>, LqError> {
    let f = riccati_factor(prob)?;
    lq_solve_with(prob, &f)
}

/// Closed-form multiplier at stage `k` (that is, `λ_k` for `0 ≤ k < N`) of a
/// pure sensitivity problem, evaluated from the factors and the primal
/// solution without backward substitution:
///
/// ```text
/// λ_k = -2 K_{k+1} x_{k+1}
///       + 2 Σ_{i=k+1..N}   (M_i^{k+1})^T l_i
///       + 2 Σ_{i=k+1..N-1} (V_i^{k+1})^T C_i l_i
/// M_i^k = -(D_{i1} + D_{i2} P_i) E_{i-1} ⋯ E_k,   M_N^k uses D_N alone
/// V_i^k = -K_{i+1} E_i ⋯ E_k
/// ```
///
/// Valid when every linear term of `prob` enters through the data coupling
/// (`r_k = s_k = v_k = 0`).
pub fn stagewise_dual<T: Scalar>(
    prob: &LqProblemOf<T>,
    f: &RiccatiFactorsOf<T>,
    traj: &TrajectoryOf<T>,
    k: usize,
) -> DVector<T> {
    let n = prob.n;
    assert!(k < n, "stagewise dual is defined for 0 <= k < N");
    let coupling = prob
        .coupling
        .as_ref()
        .expect("stagewise dual requires data coupling");
    let two = T::one() + T::one();

    let mut lam = -(&f.k[k + 1] * &traj.x[k + 1]) * two;
    // phi = E_{i-1} ⋯ E_{k+1}, maintained incrementally over i.
    let mut phi = DMatrix::<T>::identity(prob.nx, prob.nx);
    for i in (k + 1)..=n {
        if i == n {
            // 2 (M_N^{k+1})^T l_N with M_N^{k+1} = -D_N phi.
            lam += -phi.transpose() * (coupling.dn.transpose() * &coupling.ln) * two;
        } else {
            let cs = &coupling.stages[i];
            let dp = &cs.d1 + &cs.d2 * &f.p[i];
            lam += -phi.transpose() * (dp.transpose() * &cs.l) * two;
            phi = &f.e[i] * phi;
            // 2 (V_i^{k+1})^T C_i l_i with V_i^{k+1} = -K_{i+1} phi.
            lam += -phi.transpose() * (&f.k[i + 1] * (&cs.c * &cs.l)) * two;
        }
    }
    lam
}
