//! Benchmark problem tests: analytic derivatives against central finite
//! differences, physical fixed points, and sign structure.

use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schwarz_ocp::error::EvalError;
use schwarz_ocp::nlp::check_derivatives;
use schwarz_ocp::problems::{quadrotor, thin_plate, QuadrotorParams, ThinPlateModel, ThinPlateParams};

fn rand_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

#[test]
fn quadrotor_hover_is_fixed_point() {
    let ocp = quadrotor(QuadrotorParams::new(100));
    let x = DVector::zeros(9);
    let mut u = DVector::zeros(4);
    u[0] = 9.8;
    let next = ocp.model.dynamics(0, &x, &u).unwrap();
    assert_abs_diff_eq!((next - x).norm(), 0.0, epsilon = 1e-14);
}

#[test]
fn quadrotor_derivatives_match_finite_differences() {
    let ocp = quadrotor(QuadrotorParams::new(100));
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let mut x = rand_vec(&mut rng, 9, 0.8);
        x[7] = x[7].clamp(-1.2, 1.2);
        let u = rand_vec(&mut rng, 4, 5.0);
        let lam = rand_vec(&mut rng, 9, 2.0);
        let err = check_derivatives(&ocp, 3, &x, &u, &lam, 1e-5).unwrap();
        assert!(err <= 1e-5, "derivative error {err}");
    }
}

#[test]
fn quadrotor_alpha_periodicity() {
    let ocp = quadrotor(QuadrotorParams::new(100));
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = rand_vec(&mut rng, 9, 1.0);
    let u = rand_vec(&mut rng, 4, 3.0);
    let mut x2 = x.clone();
    x2[8] += 2.0 * std::f64::consts::PI;
    let f1 = ocp.model.dynamics(0, &x, &u).unwrap();
    let mut f2 = ocp.model.dynamics(0, &x2, &u).unwrap();
    f2[8] -= 2.0 * std::f64::consts::PI;
    assert_abs_diff_eq!((f1 - f2).norm(), 0.0, epsilon = 1e-10);
}

#[test]
fn quadrotor_singularity_reported() {
    let ocp = quadrotor(QuadrotorParams::new(100));
    let mut x = DVector::zeros(9);
    x[7] = std::f64::consts::FRAC_PI_2;
    let u = DVector::zeros(4);
    assert!(matches!(
        ocp.model.dynamics(5, &x, &u),
        Err(EvalError::TrigSingularity { stage: 5 })
    ));
}

#[test]
fn thin_plate_steady_state() {
    let ocp = thin_plate(ThinPlateParams::new(100));
    let n = ocp.nx();
    let x = DVector::from_element(n, 300.0);
    let u = DVector::zeros(n);
    let next = ocp.model.dynamics(0, &x, &u).unwrap();
    assert_abs_diff_eq!((next - x).norm(), 0.0, epsilon = 1e-9);
}

#[test]
fn thin_plate_radiation_hessian_value() {
    // ∂²/∂x² of the radiation term at x = T̄, folded through -λ Δt with
    // λ = -1/Δt so the contribution appears with unit weight:
    // 12·(2εσ/κt_z)·T̄² = 12·(2·0.5·5.67e-8/4)·9e4.
    let ocp = thin_plate(ThinPlateParams::new(100));
    let n = ocp.nx();
    let x = DVector::from_element(n, 300.0);
    let u = DVector::zeros(n);
    let mut lam = DVector::zeros(n);
    lam[0] = -1.0 / 10.0;
    let h = ocp.model.lagrangian_hessian(0, &x, &u, &lam).unwrap();
    let w = 10.0 * (1.0 / 81.0); // quadrature weight Δt·h² on the cost diagonal
    let expected = 12.0 * (2.0 * 0.5 * 5.67e-8 / 4.0) * 9.0e4;
    assert_abs_diff_eq!(h.q[(0, 0)] - w, expected, epsilon = 1e-9);
}

#[test]
fn thin_plate_derivatives_match_finite_differences() {
    let ocp = thin_plate(ThinPlateParams::new(100));
    let n = ocp.nx();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let x = DVector::from_element(n, 300.0) + rand_vec(&mut rng, n, 5.0);
        let u = rand_vec(&mut rng, n, 10.0);
        let lam = rand_vec(&mut rng, n, 1.0);
        let err = check_derivatives(&ocp, 2, &x, &u, &lam, 1e-4).unwrap();
        assert!(err <= 1e-5, "derivative error {err}");
    }
}

#[test]
fn thin_plate_sign_structure() {
    // With u = 0 and x > T̄ everywhere, convection and radiation enter with
    // positive sign as written in the PDE.
    let model = ThinPlateModel::new(ThinPlateParams::new(100));
    let n = model.nodes();
    let x = DVector::from_element(n, 310.0);
    let u = DVector::zeros(n);
    let rhs = model.rhs(&x, &u);
    // Uniform interior field: the Laplacian sees only the cooler boundary,
    // so -Δx > 0 as well; every term is positive.
    for i in 0..n {
        let conv = 0.5 * (310.0 - 300.0);
        let rad = 1.4175e-8 * (310.0_f64.powi(4) - 300.0_f64.powi(4));
        assert!(rhs[i] >= conv + rad - 1e-9);
    }
}
