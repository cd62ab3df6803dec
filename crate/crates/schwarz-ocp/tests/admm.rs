//! Consensus-ADMM baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use schwarz_ocp::baselines::{admm_solve, AdmmConfig};
use schwarz_ocp::lq::{dense_kkt_solve, testgen};
use schwarz_ocp::nlp::{sqp_solve, SqpOptions};
use schwarz_ocp::ocp::NlpOcp;
use schwarz_ocp::problems::{quadrotor, QuadrotorParams};
use schwarz_ocp::Trajectory;

#[test]
fn single_subdomain_matches_centralized_sqp() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let prob = testgen::random_convex(&mut rng, 15, 3, 2);
    let ocp = NlpOcp::from_lq(prob);
    let init = Trajectory::zeros(15, 3, 2);

    let central = sqp_solve(&ocp, &init, &SqpOptions::default()).unwrap();
    let out = admm_solve(&ocp, &AdmmConfig::new(1, 1.0), &init).unwrap();

    assert!(out.converged);
    assert_eq!(out.iters, 1);
    assert!(out.traj.norm_w_diff(&central.traj) <= 1e-10);
}

#[test]
fn kkt_point_is_a_fixed_point() {
    let ocp = quadrotor(QuadrotorParams::new(120));
    let init = Trajectory::zeros(120, 9, 4);
    let sol = sqp_solve(&ocp, &init, &SqpOptions::default()).unwrap().traj;

    let cfg = AdmmConfig { max_iters: 1, ..AdmmConfig::new(3, 1.0) };
    let out = admm_solve(&ocp, &cfg, &sol).unwrap();
    let row = &out.record.rows[0];
    assert!(row.eps_pr <= 10.0 * cfg.inner.tol, "eps_pr {}", row.eps_pr);
    assert!(row.eps_du <= 10.0 * cfg.inner.tol, "eps_du {}", row.eps_du);
    assert!(out.traj.norm_w_diff(&sol) <= 1e-6);
}

#[test]
fn convex_lq_converges_to_dense_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let prob = testgen::random_convex(&mut rng, 24, 3, 2);
    let oracle = dense_kkt_solve(&prob).unwrap();
    let ocp = NlpOcp::from_lq(prob);

    let cfg = AdmmConfig {
        tol_pr: 1e-9,
        tol_du: 1e-9,
        max_iters: 500,
        ..AdmmConfig::new(4, 1.0)
    };
    let out = admm_solve(&ocp, &cfg, &Trajectory::zeros(24, 3, 2)).unwrap();

    assert!(out.converged, "seam residuals did not converge in 500 iterations");
    assert!(
        out.traj.norm_w_diff(&oracle) <= 1e-5,
        "err {}",
        out.traj.norm_w_diff(&oracle)
    );
}

#[test]
fn seam_residuals_decrease_on_convex_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let prob = testgen::random_convex_ti(&mut rng, 30, 2, 1, 0.8);
    let ocp = NlpOcp::from_lq(prob);

    let cfg = AdmmConfig { max_iters: 60, ..AdmmConfig::new(3, 1.0) };
    let out = admm_solve(&ocp, &cfg, &Trajectory::zeros(30, 2, 1)).unwrap();
    let first = &out.record.rows[0];
    let last = out.record.rows.last().unwrap();
    assert!(last.eps_pr < 1e-3 * first.eps_pr.max(1e-6));
    assert!(last.kkt_stat < first.kkt_stat);
}
