//! SQP solver tests: one-step exactness on quadratic problems, benchmark
//! convergence, warm starts, and merit monotonicity.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use schwarz_ocp::lq::{dense_kkt_solve, testgen};
use schwarz_ocp::nlp::{check_derivatives, sqp_solve, SqpOptions};
use schwarz_ocp::ocp::NlpOcp;
use schwarz_ocp::problems::{quadrotor, QuadrotorParams};
use schwarz_ocp::Trajectory;

#[test]
fn quadratic_problem_one_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for trial in 0..10 {
        let p = testgen::random_convex(&mut rng, 10, 3, 2);
        let reference = dense_kkt_solve(&p).unwrap();
        let ocp = NlpOcp::from_lq(p);
        let start = Trajectory::zeros(10, 3, 2);
        let rep = sqp_solve(&ocp, &start, &SqpOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iters <= 1, "trial {trial}: {} iterations", rep.iters);
        assert!(rep.traj.norm_w_diff(&reference) <= 1e-8 * (1.0 + reference.norm_w()));
    }
}

#[test]
fn lq_wrapper_has_exact_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let p = testgen::random_convex(&mut rng, 5, 3, 2);
    let ocp = NlpOcp::from_lq(p);
    let x = DVector::from_fn(3, |i, _| 0.3 * i as f64 - 0.2);
    let u = DVector::from_fn(2, |i, _| 0.1 + i as f64 * 0.4);
    let lam = DVector::from_fn(3, |i, _| 0.7 - 0.3 * i as f64);
    // Central differences are exact for quadratics up to roundoff.
    let err = check_derivatives(&ocp, 2, &x, &u, &lam, 1e-4).unwrap();
    assert!(err <= 1e-9, "error {err}");
}

#[test]
fn quadrotor_converges_from_zero() {
    let ocp = quadrotor(QuadrotorParams::new(200));
    let start = Trajectory::zeros(200, 9, 4);
    let rep = sqp_solve(&ocp, &start, &SqpOptions::default()).unwrap();
    assert!(rep.converged);
    assert!(rep.kkt.stat <= 1e-8 && rep.kkt.feas <= 1e-8);

    // Local quadratic convergence: once stationarity < 1e-2, the residual
    // ratio r_{j+1}/r_j² stays bounded.
    let res: Vec<f64> = rep
        .trace
        .iter()
        .map(|r| r.stationarity.max(r.feasibility))
        .collect();
    for w in res.windows(2) {
        if w[0] < 1e-2 {
            assert!(w[1] <= 100.0 * w[0] * w[0], "ratio {} vs {}", w[1], w[0] * w[0]);
        }
    }
}

#[test]
fn merit_decreases_along_accepted_steps() {
    let ocp = quadrotor(QuadrotorParams::new(100));
    let start = Trajectory::zeros(100, 9, 4);
    let rep = sqp_solve(&ocp, &start, &SqpOptions::default()).unwrap();
    for w in rep.trace.windows(2) {
        assert!(w[1].merit <= w[0].merit + 1e-9);
    }
}

#[test]
fn warm_start_at_solution_returns_immediately() {
    let ocp = quadrotor(QuadrotorParams::new(50));
    let start = Trajectory::zeros(50, 9, 4);
    let rep = sqp_solve(&ocp, &start, &SqpOptions::default()).unwrap();
    let again = sqp_solve(&ocp, &rep.traj, &SqpOptions::default()).unwrap();
    assert_eq!(again.iters, 0);
    assert!(again.traj.norm_w_diff(&rep.traj) <= 1e-10);
}

#[test]
fn warm_start_near_solution_stays_in_basin() {
    let ocp = quadrotor(QuadrotorParams::new(50));
    let start = Trajectory::zeros(50, 9, 4);
    let sol = sqp_solve(&ocp, &start, &SqpOptions::default()).unwrap().traj;
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut near = sol.clone();
    use rand::Rng;
    for v in near.x.iter_mut().chain(near.u.iter_mut()).chain(near.lambda.iter_mut()) {
        for e in v.iter_mut() {
            *e += rng.gen_range(-1e-4..1e-4);
        }
    }
    let rep = sqp_solve(&ocp, &near, &SqpOptions::default()).unwrap();
    assert!(rep.traj.norm_w_diff(&sol) <= 1e-6);
}
