//! Reproducible random problem instances.
//!
//! Used by the test suites and the benchmark command. All generators take an
//! explicit RNG so that instances are seed-deterministic.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::lq::{CouplingOf, CouplingStageOf, LqProblemOf};

fn rand_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

fn rand_vector<R: Rng>(rng: &mut R, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.gen_range(-scale..scale))
}

/// Random symmetric positive definite matrix `M^T M / dim + margin * I`.
fn rand_spd<R: Rng>(rng: &mut R, dim: usize, margin: f64) -> DMatrix<f64> {
    let m = rand_matrix(rng, dim, dim, 1.0);
    m.transpose() * &m / dim as f64 + DMatrix::identity(dim, dim) * margin
}

/// Random instance with every stage Hessian positive definite.
///
/// Each `H_k` is drawn as a full SPD block over `(x, u)` and split into
/// `(Q, S, R)`, so strong convexity holds with margin at least 0.2. `A` is
/// scaled to keep rollouts bounded over moderate horizons.
pub fn random_convex<R: Rng>(rng: &mut R, n: usize, nx: usize, nu: usize) -> LqProblemOf<f64> {
    let mut prob = LqProblemOf::zeros(n, nx, nu);
    for st in prob.stages.iter_mut() {
        let h = rand_spd(rng, nx + nu, 0.2);
        st.q = h.view((0, 0), (nx, nx)).into();
        st.s = h.view((nx, 0), (nu, nx)).into();
        st.r = h.view((nx, nx), (nu, nu)).into();
        st.a = rand_matrix(rng, nx, nx, 1.0 / (nx as f64).sqrt());
        st.b = rand_matrix(rng, nx, nu, 1.0);
        st.v = rand_vector(rng, nx, 1.0);
        st.r_lin = rand_vector(rng, nx, 1.0);
        st.s_lin = rand_vector(rng, nu, 1.0);
    }
    prob.qn = rand_spd(rng, nx, 0.2);
    prob.rn_lin = rand_vector(rng, nx, 1.0);
    prob.x0 = rand_vector(rng, nx, 1.0);
    prob
}

/// Random time-invariant instance with adjustable dynamics spectral scale,
/// for controllability/decay experiments.
pub fn random_convex_ti<R: Rng>(
    rng: &mut R,
    n: usize,
    nx: usize,
    nu: usize,
    a_scale: f64,
) -> LqProblemOf<f64> {
    let mut prob = random_convex(rng, n, nx, nu);
    let h = rand_spd(rng, nx + nu, 0.2);
    let q: DMatrix<f64> = h.view((0, 0), (nx, nx)).into();
    let s: DMatrix<f64> = h.view((nx, 0), (nu, nx)).into();
    let r: DMatrix<f64> = h.view((nx, nx), (nu, nu)).into();
    let mut a = rand_matrix(rng, nx, nx, 1.0);
    let spectral = a.singular_values()[0];
    a *= a_scale / spectral;
    let b = rand_matrix(rng, nx, nu, 1.0);
    for st in prob.stages.iter_mut() {
        st.q = q.clone();
        st.s = s.clone();
        st.r = r.clone();
        st.a = a.clone();
        st.b = b.clone();
    }
    prob.qn = q.clone();
    prob
}

/// Random pure sensitivity instance: all linear content enters through the
/// data coupling (`r = s = v = 0`), with direction components `l_{-1} = x0`,
/// `l_0, ..., l_N` drawn at random.
pub fn random_sensitivity<R: Rng>(
    rng: &mut R,
    n: usize,
    nx: usize,
    nu: usize,
    nd: usize,
) -> LqProblemOf<f64> {
    let mut prob = random_convex(rng, n, nx, nu);
    for st in prob.stages.iter_mut() {
        st.v = DVector::zeros(nx);
        st.r_lin = DVector::zeros(nx);
        st.s_lin = DVector::zeros(nu);
    }
    prob.rn_lin = DVector::zeros(nx);
    prob.coupling = Some(CouplingOf {
        stages: (0..n)
            .map(|_| CouplingStageOf {
                d1: rand_matrix(rng, nd, nx, 1.0),
                d2: rand_matrix(rng, nd, nu, 1.0),
                c: rand_matrix(rng, nx, nd, 1.0),
                l: rand_vector(rng, nd, 1.0),
            })
            .collect(),
        dn: rand_matrix(rng, nd, nx, 1.0),
        ln: rand_vector(rng, nd, 1.0),
    });
    prob
}

/// Makes some stage `Q_k` indefinite while keeping the reduced Hessian
/// positive definite, by subtracting a multiple of the identity and backing
/// off until positivity of the reduced Hessian is restored.
///
/// Returns the indefinite problem; panics if no shift preserves reduced
/// positivity (does not occur for the generator's margins).
pub fn make_q_indefinite(mut prob: LqProblemOf<f64>, stage: usize) -> LqProblemOf<f64> {
    let nx = prob.nx;
    let min_eig = |m: &DMatrix<f64>| {
        let vals = m.clone().symmetric_eigen().eigenvalues;
        vals.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let base = prob.stages[stage].q.clone();
    let mut shift = min_eig(&base) + 0.5;
    for _ in 0..60 {
        prob.stages[stage].q = &base - DMatrix::identity(nx, nx) * shift;
        let q_indefinite = min_eig(&prob.stages[stage].q) < 0.0;
        if q_indefinite && prob.reduced_hessian_min_eig() > 1e-8 {
            return prob;
        }
        shift *= if q_indefinite { 0.7 } else { 1.3 };
    }
    panic!("could not build an indefinite-Q instance with positive reduced Hessian");
}
