//! Dense saddle-point solve of the full KKT system.
//!
//! Assembles `[2H  G^T; G  0] (z; λ) = (-h; b)` over the stacked variable
//! `z = (x_0, u_0, ..., x_{N-1}, u_{N-1}, x_N)` and solves it by LU with full
//! pivoting. Serves as a structure-free cross-check for the Riccati solver;
//! cost is cubic in the horizon, so keep instances small.

use nalgebra::{DMatrix, DVector};

use crate::error::LqError;
use crate::lq::LqProblemOf;
use crate::traj::{Scalar, TrajectoryOf};

/// Solves the problem through the monolithic KKT system.
pub fn dense_kkt_solve<T: Scalar>(prob: &LqProblemOf<T>) -> Result<TrajectoryOf<T>, LqError> {
    prob.validate()?;
    let (n, nx, nu) = (prob.n, prob.nx, prob.nu);
    let nz = (n + 1) * nx + n * nu;
    // Dynamics rows always; the initial-state row only when x_0 is pinned.
    let ncon = n * nx + if prob.free_initial { 0 } else { nx };
    let dim = nz + ncon;
    let two = T::one() + T::one();

    let z_off = |k: usize| k * (nx + nu);
    let u_off = |k: usize| k * (nx + nu) + nx;

    let mut m = DMatrix::<T>::zeros(dim, dim);
    let mut rhs = DVector::<T>::zeros(dim);

    for k in 0..n {
        let st = &prob.stages[k];
        m.view_mut((z_off(k), z_off(k)), (nx, nx)).copy_from(&(&st.q * two));
        m.view_mut((u_off(k), z_off(k)), (nu, nx)).copy_from(&(&st.s * two));
        m.view_mut((z_off(k), u_off(k)), (nx, nu))
            .copy_from(&(st.s.transpose() * two));
        m.view_mut((u_off(k), u_off(k)), (nu, nu)).copy_from(&(&st.r * two));
        rhs.rows_mut(z_off(k), nx).copy_from(&(-prob.r_lin_eff(k)));
        rhs.rows_mut(u_off(k), nu).copy_from(&(-prob.s_lin_eff(k)));
    }
    m.view_mut((z_off(n), z_off(n)), (nx, nx)).copy_from(&(&prob.qn * two));
    rhs.rows_mut(z_off(n), nx).copy_from(&(-prob.rn_lin_eff()));

    // Constraint rows G and rhs b; G enters at both (nz.., ..) and transposed.
    let mut con = 0;
    let put = |m: &mut DMatrix<T>, row: usize, col: usize, blk: &DMatrix<T>| {
        m.view_mut((nz + row, col), blk.shape()).copy_from(blk);
        m.view_mut((col, nz + row), (blk.ncols(), blk.nrows()))
            .copy_from(&blk.transpose());
    };
    let eye = DMatrix::<T>::identity(nx, nx);
    if !prob.free_initial {
        put(&mut m, con, z_off(0), &eye);
        rhs.rows_mut(nz + con, nx).copy_from(&prob.x0);
        con += nx;
    }
    for k in 0..n {
        let st = &prob.stages[k];
        put(&mut m, con, z_off(k), &(-&st.a));
        put(&mut m, con, u_off(k), &(-&st.b));
        put(&mut m, con, z_off(k + 1), &eye);
        rhs.rows_mut(nz + con, nx).copy_from(&prob.v_eff(k));
        con += nx;
    }

    let sol = m.full_piv_lu().solve(&rhs).ok_or(LqError::SingularKkt)?;

    let mut traj = TrajectoryOf::zeros(n, nx, nu);
    for k in 0..n {
        traj.x[k] = sol.rows(z_off(k), nx).into();
        traj.u[k] = sol.rows(u_off(k), nu).into();
    }
    traj.x[n] = sol.rows(z_off(n), nx).into();
    let mut lrow = nz;
    if !prob.free_initial {
        *traj.lambda_at_mut(-1) = sol.rows(lrow, nx).into();
        lrow += nx;
    }
    for k in 0..n {
        *traj.lambda_at_mut(k as isize) = sol.rows(lrow, nx).into();
        lrow += nx;
    }
    Ok(traj)
}
