//! End-to-end acceptance suite. Each test covers one acceptance criterion
//! and prints a single pass line; a failed assertion is the fail line.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schwarz_ocp::baselines::{admm_solve, AdmmConfig};
use schwarz_ocp::error::SchwarzError;
use schwarz_ocp::lq::testgen::{make_q_indefinite, random_convex, random_convex_ti, random_sensitivity};
use schwarz_ocp::lq::{convexify, dense_kkt_solve, lq_solve, riccati_factor, stagewise_dual};
use schwarz_ocp::nlp::{sqp_solve, SqpOptions};
use schwarz_ocp::ocp::NlpOcp;
use schwarz_ocp::problems::{quadrotor, quadrotor_perturbed, thin_plate, QuadrotorParams, ThinPlateParams};
use schwarz_ocp::schwarz::{make_partition, schwarz_solve, Overlap, SchwarzConfig};
use schwarz_ocp::sensitivity::{
    build_sensitivity_lqp, eds_probe, gaussian_vector, Boundary, Direction, EdsOptions,
    EdsPerturbation,
};
use schwarz_ocp::{LqProblem, Trajectory};

fn random_iterate(n: usize, nx: usize, nu: usize, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Trajectory::zeros(n, nx, nu);
    for v in t.x.iter_mut().chain(t.u.iter_mut()).chain(t.lambda.iter_mut()) {
        for e in v.iter_mut() {
            *e = rng.gen_range(-1.0..1.0);
        }
    }
    t
}

/// Least-squares line fit `y ≈ a + b x`; returns `(b, r²)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (b, r2)
}

fn stage_hessian_min_eig(prob: &LqProblem) -> f64 {
    let (nx, nu) = (prob.nx, prob.nu);
    let mut m = f64::INFINITY;
    let eig = |h: &nalgebra::DMatrix<f64>| {
        h.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    for st in &prob.stages {
        let mut h = nalgebra::DMatrix::zeros(nx + nu, nx + nu);
        h.view_mut((0, 0), (nx, nx)).copy_from(&st.q);
        h.view_mut((nx, 0), (nu, nx)).copy_from(&st.s);
        h.view_mut((0, nx), (nx, nu)).copy_from(&st.s.transpose());
        h.view_mut((nx, nx), (nu, nu)).copy_from(&st.r);
        m = m.min(eig(&h));
    }
    m.min(eig(&prob.qn))
}

#[test]
fn criterion_01_lq_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..100 {
        let n = rng.gen_range(1..=50);
        let nx = rng.gen_range(1..=6);
        let nu = rng.gen_range(1..=3);
        let prob = random_convex(&mut rng, n, nx, nu);
        assert!(prob.reduced_hessian_min_eig() > 0.0);
        let a = lq_solve(&prob).unwrap();
        let b = dense_kkt_solve(&prob).unwrap();
        let err = a.norm_w_diff(&b);
        assert!(
            err <= 1e-8 * (1.0 + b.norm_w()),
            "trial {trial} (N={n}, nx={nx}, nu={nu}): err {err}"
        );
    }
    println!("criterion 1 PASS: Riccati matches dense KKT on 100 random LQ instances");
}

#[test]
fn criterion_02_convexification_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..50 {
        let n = rng.gen_range(2..=20);
        let prob = random_convex(&mut rng, n, 3, 2);
        let gamma_h = stage_hessian_min_eig(&prob);
        assert!(gamma_h > 0.0);
        let beta = gamma_h / 2.0;
        let (conv, qbar) = convexify(&prob, beta).unwrap();

        let sol = dense_kkt_solve(&prob).unwrap();
        let sol_c = dense_kkt_solve(&conv).unwrap();
        for k in 0..=n {
            assert!(
                (&sol.x[k] - &sol_c.x[k]).norm() <= 1e-8,
                "trial {trial}: primal x mismatch at {k}"
            );
            if k < n {
                assert!((&sol.u[k] - &sol_c.u[k]).norm() <= 1e-8);
            }
        }
        for k in -1..(n as isize) {
            let shift = if (k + 1) as usize <= n {
                &qbar[(k + 1) as usize] * &sol.x[(k + 1) as usize] * 2.0
            } else {
                DVector::zeros(prob.nx)
            };
            let gap = (sol.lambda_at(k) - (sol_c.lambda_at(k) - shift)).norm();
            assert!(gap <= 1e-7, "trial {trial}: dual shift identity failed at k={k}: {gap}");
        }
    }
    println!("criterion 2 PASS: convexified primal agreement and dual shift identity on 50 instances");
}

#[test]
fn criterion_03_stagewise_dual_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let n = rng.gen_range(5..=30);
        let prob = random_sensitivity(&mut rng, n, 3, 2, 2);
        let f = riccati_factor(&prob).unwrap();
        let traj = lq_solve(&prob).unwrap();
        for k in 0..n {
            let closed = stagewise_dual(&prob, &f, &traj, k);
            let solved = traj.lambda_at(k as isize);
            assert!(
                (&closed - solved).norm() <= 1e-8 * (1.0 + solved.norm()),
                "trial {trial}, stage {k}: {}",
                (&closed - solved).norm()
            );
        }
    }
    println!("criterion 3 PASS: closed-form stagewise duals match solver duals on 20 sensitivity LQPs");
}

#[test]
fn criterion_04_sensitivity_lqp_finite_difference() {
    // LQ base: the solution map is affine, so the finite difference at a
    // fixed small h is essentially exact.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let prob = random_convex(&mut rng, 20, 3, 2);
    let ocp = NlpOcp::from_lq(prob.clone());
    let at = sqp_solve(&ocp, &ocp.constant_start(), &SqpOptions::default()).unwrap().traj;
    let e = DVector::from_element(3, 1.0);
    let lqp = build_sensitivity_lqp(&ocp, &at, &Direction::initial(&ocp, e.clone())).unwrap();
    let sens = lq_solve(&lqp).unwrap();

    let h = 1e-6;
    let mut pert = prob.clone();
    pert.x0 += &e * h;
    let fd = dense_kkt_solve(&pert).unwrap().sub(&at).scale(1.0 / h);
    let lq_err = fd.norm_w_diff(&sens);
    assert!(lq_err <= 1e-4, "LQ base finite-difference error {lq_err}");

    // Nonlinear base: truncation is O(h), so the error must decrease over
    // h = 1e-4, 1e-5, 1e-6.
    let opts = SqpOptions { tol: 1e-11, ..SqpOptions::default() };
    let ocp = quadrotor(QuadrotorParams::new(40));
    let at = sqp_solve(&ocp, &ocp.constant_start(), &opts).unwrap().traj;
    let mut e = DVector::zeros(9);
    for i in [0, 2, 4, 6, 7, 8] {
        e[i] = 4.0;
    }
    let lqp = build_sensitivity_lqp(&ocp, &at, &Direction::initial(&ocp, e.clone())).unwrap();
    let sens = lq_solve(&lqp).unwrap();
    let mut errs = Vec::new();
    for h in [1e-4, 1e-5, 1e-6] {
        let mut pert = ocp.clone();
        pert.x0 = &ocp.x0 + &e * h;
        let sol = sqp_solve(&pert, &at, &opts).unwrap().traj;
        errs.push(sol.sub(&at).scale(1.0 / h).norm_w_diff(&sens));
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors not decreasing: {errs:?}");
    println!(
        "criterion 4 PASS: sensitivity LQP matches finite differences (LQ err {lq_err:.2e}; nonlinear errs {errs:?})"
    );
}

#[test]
fn criterion_05_overlap_iteration_trend() {
    let ocp = quadrotor(QuadrotorParams::new(2400));
    let init = ocp.constant_start();
    let iters = |rel: f64| {
        let mut cfg = SchwarzConfig::new(3, Overlap::Relative(rel));
        cfg.mu = 1.0;
        cfg.tol_pr = 1e-6;
        cfg.tol_du = 1e-6;
        schwarz_solve(&ocp, &cfg, &init).unwrap().outer_iters
    };
    let (i3, i5, i10) = (iters(0.3), iters(0.5), iters(1.0));
    assert!(i3 > i5 && i5 >= i10, "iteration counts not monotone: {i3}/{i5}/{i10}");
    println!("criterion 5 PASS: outer iterations monotone in overlap ({i3}/{i5}/{i10})");
}

#[test]
fn criterion_06_contraction_rate_in_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut prob = random_convex_ti(&mut rng, 200, 3, 2, 1.05);
    // Weak actuation slows the closed-loop decay so several outer
    // iterations stay above the measurement floor at every overlap.
    for st in prob.stages.iter_mut() {
        st.b *= 0.3;
    }
    let reference = dense_kkt_solve(&prob).unwrap();
    let ocp = NlpOcp::from_lq(prob);
    let mut start = random_iterate(200, 3, 2, 60).scale(1e3);
    start.x[0] = ocp.x0.clone();

    let alpha_hat = |tau: usize| -> f64 {
        let mut cfg = SchwarzConfig::new(4, Overlap::Stages(tau));
        cfg.tol_pr = 1e-9;
        cfg.tol_du = 1e-9;
        cfg.max_outer = 60;
        cfg.inner.tol = 1e-10;
        cfg.reference = Some(reference.clone());
        let record = match schwarz_solve(&ocp, &cfg, &start) {
            Ok(o) => o.record,
            Err(SchwarzError::MaxOuterIterations(o)) => o.record,
            Err(e) => panic!("tau {tau}: {e}"),
        };
        let pts: Vec<(f64, f64)> = record
            .rows
            .iter()
            .filter_map(|r| r.err_vs_ref)
            .enumerate()
            .filter(|(_, e)| *e > 1e-7)
            .map(|(j, e)| (j as f64, e.ln()))
            .collect();
        assert!(pts.len() >= 2, "tau {tau}: only {} usable error points", pts.len());
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let (slope, _) = linear_fit(&xs, &ys);
        slope.exp()
    };

    let taus = [1usize, 2, 4, 8];
    let alphas: Vec<f64> = taus.iter().map(|&t| alpha_hat(t)).collect();
    for w in alphas.windows(2) {
        assert!(w[1] < w[0], "contraction did not improve with overlap: {alphas:?}");
    }
    let xs: Vec<f64> = taus.iter().map(|&t| t as f64).collect();
    let ys: Vec<f64> = alphas.iter().map(|a| -a.ln()).collect();
    let (_, r2) = linear_fit(&xs, &ys);
    assert!(r2 >= 0.9, "-log alpha not linear in tau: r2 {r2}, alphas {alphas:?}");
    println!("criterion 6 PASS: contraction factors {alphas:?} decay linearly in overlap (r2 {r2:.3})");
}

#[test]
fn criterion_07_global_convergence_with_indefinite_stage() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let prob = make_q_indefinite(random_convex(&mut rng, 24, 3, 2), 10);
    assert!(prob.reduced_hessian_min_eig() > 0.0);
    let reference = dense_kkt_solve(&prob).unwrap();
    let ocp = NlpOcp::from_lq(prob);

    for s in 0..10 {
        let scale = 10f64.powf(1.0 + 2.0 * s as f64 / 9.0);
        let mut start = random_iterate(24, 3, 2, 70 + s).scale(scale);
        start.x[0] = ocp.x0.clone();
        let cfg = SchwarzConfig::new(4, Overlap::Stages(3));
        let out = schwarz_solve(&ocp, &cfg, &start).unwrap();
        let err = out.traj.norm_w_diff(&reference);
        assert!(err <= 1e-6, "start {s} (scale {scale:.0}): err {err}");
    }
    println!("criterion 7 PASS: 10 far starts (norms up to 1e3) converge on an indefinite-Q instance");
}

#[test]
fn criterion_08_eds_coalescence() {
    let params = QuadrotorParams::new(2400);
    let ocp = quadrotor(params.clone());
    let nx = ocp.nx();
    let at = sqp_solve(&ocp, &ocp.constant_start(), &SqpOptions::default()).unwrap().traj;

    let magnitude = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let scaled = |rng: &mut ChaCha8Rng| {
        let g = gaussian_vector(rng, nx);
        let n = g.norm();
        g * (magnitude / n)
    };
    let perts: Vec<EdsPerturbation> = (0..30)
        .map(|j| {
            let boundary = match j % 3 {
                1 => Boundary::Terminal,
                2 => Boundary::Both,
                _ => Boundary::Initial,
            };
            let dx0 = match boundary {
                Boundary::Terminal => DVector::zeros(nx),
                _ => scaled(&mut rng),
            };
            let dterm = match boundary {
                Boundary::Initial => DVector::zeros(nx),
                _ => scaled(&mut rng),
            };
            EdsPerturbation {
                ocp: quadrotor_perturbed(params.clone(), &ocp.x0 + &dx0, dterm),
                boundary,
                magnitude,
                descriptor: format!("perturbation {j}"),
            }
        })
        .collect();

    let reports = eds_probe(&at, &perts, &EdsOptions::default()).unwrap();
    let n = ocp.n;
    let mut worst: f64 = 0.0;
    for (j, rep) in reports.iter().enumerate() {
        let d = &rep.deviations;
        // Boundary response: the peak over the 10 stages nearest either end.
        let boundary = d[..10]
            .iter()
            .chain(&d[n - 9..])
            .cloned()
            .fold(0.0_f64, f64::max);
        let mid = d[n / 2 - 10..=n / 2 + 10].iter().cloned().fold(0.0_f64, f64::max);
        let ratio = mid / boundary;
        worst = worst.max(ratio);
        assert!(ratio <= 1e-3, "sample {j} ({}): mid/boundary {ratio:.2e}", rep.boundary);
        let rho = rep.rho_hat.expect("decay fit missing");
        assert!(rho < 1.0, "sample {j}: rho_hat {rho}");
    }
    println!("criterion 8 PASS: 30 perturbations coalesce mid-horizon (worst ratio {worst:.2e}), all rho_hat < 1");
}

#[test]
fn criterion_09_fixed_point_on_both_benchmarks() {
    let check = |name: &str, ocp: &NlpOcp, t: usize| {
        let central = sqp_solve(ocp, &ocp.constant_start(), &SqpOptions::default()).unwrap().traj;
        let mut cfg = SchwarzConfig::new(t, Overlap::Relative(0.5));
        cfg.tol_pr = 1e-7;
        cfg.tol_du = 1e-7;
        cfg.max_outer = 5;
        let out = schwarz_solve(ocp, &cfg, &central).unwrap();
        let row = &out.record.rows[0];
        // 10x the inner SQP tolerance of 1e-8.
        assert!(row.eps_pr <= 1e-7, "{name}: eps_pr {:.2e}", row.eps_pr);
        assert!(row.eps_du <= 1e-7, "{name}: eps_du {:.2e}", row.eps_du);
        (row.eps_pr, row.eps_du)
    };
    let quad = quadrotor(QuadrotorParams::new(2400));
    let (qp, qd) = check("quadrotor", &quad, 3);
    let mut tp_params = ThinPlateParams::new(8640);
    tp_params.mesh = 5;
    let plate = thin_plate(tp_params);
    let (pp, pd) = check("thinplate", &plate, 4);
    println!(
        "criterion 9 PASS: KKT points are fixed points (quadrotor eps {qp:.1e}/{qd:.1e}, thin plate {pp:.1e}/{pd:.1e})"
    );
}

#[test]
fn criterion_10_benchmark_schwarz_vs_admm() {
    let ocp = quadrotor(QuadrotorParams::new(2400));
    let init = ocp.constant_start();
    // The source experiment uses 20 subdomains at 10x the horizon; the
    // subdomain count scales with the horizon to keep the windows long
    // enough for the prescribed penalty range.
    let t = 10;

    let schwarz_terminal = |mu: f64| -> (f64, usize) {
        let mut cfg = SchwarzConfig::new(t, Overlap::Relative(1.0));
        cfg.mu = mu;
        cfg.tol_pr = 1e-6;
        cfg.tol_du = 1e-6;
        cfg.max_outer = 100;
        let out = schwarz_solve(&ocp, &cfg, &init).unwrap();
        let row = out.record.rows.last().unwrap();
        (row.kkt_stat.max(row.kkt_feas), out.outer_iters)
    };
    let (s01, _) = schwarz_terminal(0.1);
    let (s1, budget) = schwarz_terminal(1.0);
    let (s10, _) = schwarz_terminal(10.0);
    assert!(s1 <= 1e-6, "schwarz terminal residual {s1:.2e}");

    let admm_terminal = |rho: f64| -> f64 {
        let mut cfg = AdmmConfig::new(t, rho);
        cfg.tol_pr = 1e-12;
        cfg.tol_du = 1e-12;
        cfg.max_iters = budget;
        let out = admm_solve(&ocp, &cfg, &init).unwrap();
        let row = out.record.rows.last().unwrap();
        row.kkt_stat.max(row.kkt_feas)
    };
    let admm: Vec<f64> = [0.1, 1.0, 10.0].iter().map(|&r| admm_terminal(r)).collect();
    let best_admm = admm.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        best_admm > s1,
        "ADMM best residual {best_admm:.2e} not above Schwarz {s1:.2e}"
    );

    let smax = s01.max(s1).max(s10);
    let smin = s01.min(s1).min(s10);
    assert!(smax / smin < 10.0, "Schwarz residual spread {:.1}x", smax / smin);
    let amax = admm.iter().cloned().fold(0.0_f64, f64::max);
    assert!(amax / best_admm > 10.0, "ADMM residual spread {:.1}x", amax / best_admm);
    println!(
        "criterion 10 PASS: Schwarz {s1:.1e} (spread {:.1}x) vs ADMM best {best_admm:.1e} (spread {:.1}x) at {budget} iterations",
        smax / smin,
        amax / best_admm
    );
}

#[test]
fn criterion_11_property_trials() {
    let mut trials = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // Norm axioms: homogeneity, subadditivity.
    for _ in 0..400 {
        let n = rng.gen_range(1..8);
        let a = random_iterate(n, 3, 2, rng.gen());
        let b = random_iterate(n, 3, 2, rng.gen());
        let c: f64 = rng.gen_range(-3.0..3.0);
        assert!((a.scale(c).norm_w() - c.abs() * a.norm_w()).abs() <= 1e-12 * (1.0 + a.norm_w()));
        assert!(a.add(&b).norm_w() <= a.norm_w() + b.norm_w() + 1e-12);
        trials += 1;
    }

    // Restriction keeps absolute entries.
    for _ in 0..150 {
        let n = rng.gen_range(2..12);
        let full = random_iterate(n, 3, 2, rng.gen());
        let n1 = rng.gen_range(0..n - 1);
        let n2 = rng.gen_range(n1 + 1..=n);
        let s = full.slice(n1, n2);
        for k in n1..=n2 {
            assert_eq!(s.x[k - n1], full.x[k]);
        }
        assert_eq!(s.lambda_at(-1), full.lambda_at(n1 as isize - 1));
        trials += 1;
    }

    // Partition identities.
    for _ in 0..250 {
        let n = rng.gen_range(1..400);
        let t = rng.gen_range(1..=8.min(n));
        let tau = rng.gen_range(0..12);
        let p = make_partition(n, t, Overlap::Stages(tau)).unwrap();
        assert_eq!(p.ms[0], 0);
        assert_eq!(p.ms[t], n);
        let covered: usize = (0..t).map(|i| p.ms[i + 1] - p.ms[i]).sum();
        assert_eq!(covered, n);
        for i in 0..t {
            assert_eq!(p.n1[i], p.ms[i].saturating_sub(p.tau[i]));
            assert_eq!(p.n2[i], (p.ms[i + 1] + p.tau[i]).min(n));
        }
        trials += 1;
    }

    // Convexified stage blocks stay positive definite.
    for _ in 0..100 {
        let n = rng.gen_range(2..10);
        let prob = random_convex(&mut rng, n, 3, 2);
        let (conv, _) = convexify(&prob, 0.05).unwrap();
        for st in &conv.stages {
            assert!(st.r.clone().cholesky().is_some());
            let schur = &st.q - st.s.transpose() * st.r.clone().cholesky().unwrap().solve(&st.s);
            assert!(
                schur
                    .clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .all(|&e| e > 0.0)
            );
        }
        trials += 1;
    }

    // SQP solves quadratics in one step.
    for _ in 0..80 {
        let n = rng.gen_range(2..10);
        let prob = random_convex(&mut rng, n, 3, 2);
        let ocp = NlpOcp::from_lq(prob.clone());
        let rep = sqp_solve(&ocp, &ocp.constant_start(), &SqpOptions::default()).unwrap();
        assert!(rep.converged && rep.iters <= 1);
        let dense = dense_kkt_solve(&prob).unwrap();
        assert!(rep.traj.norm_w_diff(&dense) <= 1e-6 * (1.0 + dense.norm_w()));
        trials += 1;
    }

    // Determinism across worker counts.
    for _ in 0..20 {
        let prob = random_convex(&mut rng, 20, 3, 2);
        let ocp = NlpOcp::from_lq(prob);
        let mut start = random_iterate(20, 3, 2, rng.gen());
        start.x[0] = ocp.x0.clone();
        let cfg = SchwarzConfig::new(4, Overlap::Stages(3));
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| schwarz_solve(&ocp, &cfg, &start).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.traj.norm_w_diff(&b.traj), 0.0);
        trials += 1;
    }

    assert_eq!(trials, 1000);
    println!("criterion 11 PASS: {trials} randomized property trials");
}
