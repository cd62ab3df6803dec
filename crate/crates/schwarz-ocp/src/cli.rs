//! Command-line front end: centralized solves, Schwarz decomposition runs,
//! decay-of-sensitivity probes, and method benchmarks, all emitting CSV
//! artifacts for plotting.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 on numerical failures.
//! The environment variable `SCHWARZ_OCP_LOG` selects log verbosity.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{admm_solve, AdmmConfig};
use crate::error::SchwarzError;
use crate::lq::{dense_kkt_solve, lq_problem_from_json};
use crate::nlp::{sqp_solve, SqpOptions, SqpReport};
use crate::ocp::NlpOcp;
use crate::problems::{
    quadrotor, quadrotor_perturbed, thin_plate, QuadrotorParams, ThinPlateParams,
};
use crate::schwarz::{schwarz_solve, Overlap, SchwarzConfig};
use crate::sensitivity::{eds_probe, gaussian_vector, Boundary, EdsOptions, EdsPerturbation};

#[derive(Parser)]
#[command(name = "schwarz-ocp", version, about = "Parallel temporal decomposition for long-horizon optimal control")]
pub struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem source: quadrotor | thinplate | lqfile:<path>.
    #[arg(long)]
    problem: String,
    /// Horizon override.
    #[arg(long = "N", visible_alias = "horizon")]
    n: Option<usize>,
    /// Mesh points per side for the thin-plate problem.
    #[arg(long)]
    mesh: Option<usize>,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the parallel subproblem solves.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Centralized solve: SQP for nonlinear problems, a dense KKT solve for
    /// LQ files. Writes trajectory.csv and trace.csv.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
    },
    /// Overlapping Schwarz run. Writes convergence.csv, partition.csv, and
    /// trajectory.csv; with --sweep-overlap also sweep.csv.
    Schwarz {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of subdomains.
        #[arg(long, default_value_t = 3)]
        t: usize,
        /// Absolute per-side overlap in stages.
        #[arg(long, conflicts_with = "tau_rel")]
        tau: Option<usize>,
        /// Overlap relative to the subdomain length.
        #[arg(long)]
        tau_rel: Option<f64>,
        /// Terminal proximity penalty.
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol_pr: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol_du: f64,
        #[arg(long, default_value_t = 200)]
        max_outer: usize,
        /// Comma-separated relative overlaps; runs once per value.
        #[arg(long)]
        sweep_overlap: Option<String>,
    },
    /// Exponential-decay-of-sensitivity probe: perturbs the boundaries of a
    /// solved problem and records deviation profiles with fitted decay
    /// rates. Writes eds_<i>.csv per perturbation and summary.csv.
    Eds {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        perturbations: usize,
        #[arg(long, default_value_t = 0.1)]
        magnitude: f64,
    },
    /// Residual-trace benchmark of centralized SQP, Schwarz (μ sweep), and
    /// ADMM (penalty sweep). Writes benchmark.csv.
    Benchmark {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 20)]
        t: usize,
        #[arg(long, default_value_t = 1.0)]
        tau_rel: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol_pr: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol_du: f64,
        /// Shared outer-iteration budget for Schwarz and ADMM.
        #[arg(long, default_value_t = 100)]
        max_outer: usize,
        /// Comma-separated ADMM penalties.
        #[arg(long, default_value = "0.1,1,10")]
        admm_rho: String,
        /// Comma-separated Schwarz penalties.
        #[arg(long, default_value = "0.1,1,10")]
        mu: String,
    },
}

enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

/// A built problem instance plus everything the subcommands need to know
/// about its source.
struct Instance {
    ocp: NlpOcp,
    name: String,
    /// Parameters kept for rebuilding perturbed quadrotor instances.
    quad_params: Option<QuadrotorParams>,
    /// The parsed problem when the source is an LQ file.
    lq: Option<crate::LqProblem>,
}

fn build_instance(args: &ProblemArgs) -> Result<Instance, CliError> {
    if let Some(path) = args.problem.strip_prefix("lqfile:") {
        let text = fs::read_to_string(path)
            .map_err(|e| input(format!("cannot read LQ file {path}: {e}")))?;
        let prob = lq_problem_from_json(&text)
            .map_err(|e| input(format!("bad LQ file {path}: {e}")))?;
        return Ok(Instance {
            ocp: NlpOcp::from_lq(prob.clone()),
            name: "lqfile".into(),
            quad_params: None,
            lq: Some(prob),
        });
    }
    // Accept `name` or `name:N`.
    let (name, n_suffix) = match args.problem.split_once(':') {
        Some((name, n)) => {
            let n = n.parse::<usize>().map_err(|e| input(format!("bad horizon in --problem: {e}")))?;
            (name, Some(n))
        }
        None => (args.problem.as_str(), None),
    };
    let n_override = args.n.or(n_suffix);
    match name {
        "quadrotor" => {
            let params = QuadrotorParams::new(n_override.unwrap_or(2400));
            Ok(Instance {
                ocp: quadrotor(params.clone()),
                name: "quadrotor".into(),
                quad_params: Some(params),
                lq: None,
            })
        }
        "thinplate" => {
            let mut params = ThinPlateParams::new(n_override.unwrap_or(8640));
            if let Some(m) = args.mesh {
                if m < 3 {
                    return Err(input("mesh must have at least one interior node"));
                }
                params.mesh = m;
            }
            Ok(Instance {
                ocp: thin_plate(params),
                name: "thinplate".into(),
                quad_params: None,
                lq: None,
            })
        }
        other => Err(input(format!(
            "unknown problem {other:?}; expected quadrotor, thinplate, or lqfile:<path>"
        ))),
    }
}

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| input(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, body: impl FnOnce(&mut fs::File) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut f = fs::File::create(path)
        .map_err(|e| input(format!("cannot write {}: {e}", path.display())))?;
    body(&mut f).map_err(|e| input(format!("cannot write {}: {e}", path.display())))
}

fn write_trace(path: &Path, report: &SqpReport) -> Result<(), CliError> {
    write_file(path, |f| {
        use std::io::Write;
        writeln!(f, "iter,stationarity,feasibility,step_length,merit")?;
        for r in &report.trace {
            writeln!(
                f,
                "{},{:e},{:e},{:e},{:e}",
                r.iter, r.stationarity, r.feasibility, r.step_length, r.merit
            )?;
        }
        Ok(())
    })
}

fn cmd_solve(
    problem: &ProblemArgs,
    common: &CommonArgs,
    tol: f64,
    max_iters: usize,
) -> Result<(), CliError> {
    let inst = build_instance(problem)?;
    ensure_out(&common.out)?;

    let (traj, report) = if let Some(lq) = &inst.lq {
        let traj = dense_kkt_solve(lq).map_err(numerical)?;
        (traj, None)
    } else {
        let opts = SqpOptions { tol, max_iters, ..SqpOptions::default() };
        let report = sqp_solve(&inst.ocp, &inst.ocp.constant_start(), &opts).map_err(numerical)?;
        (report.traj.clone(), Some(report))
    };

    log::info!("{} solved over horizon {}", inst.name, inst.ocp.n);
    write_file(&common.out.join("trajectory.csv"), |f| traj.write_csv(f))?;
    if let Some(report) = report {
        write_trace(&common.out.join("trace.csv"), &report)?;
    } else {
        let kkt = inst.ocp.kkt_residual(&traj).map_err(numerical)?;
        write_file(&common.out.join("trace.csv"), |f| {
            use std::io::Write;
            writeln!(f, "iter,stationarity,feasibility,step_length,merit")?;
            writeln!(f, "0,{:e},{:e},1,{:e}", kkt.stat, kkt.feas, inst.ocp.objective(&traj))
        })?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_schwarz(
    problem: &ProblemArgs,
    common: &CommonArgs,
    t: usize,
    tau: Option<usize>,
    tau_rel: Option<f64>,
    mu: f64,
    tol_pr: f64,
    tol_du: f64,
    max_outer: usize,
    sweep_overlap: Option<&str>,
) -> Result<(), CliError> {
    let inst = build_instance(problem)?;
    ensure_out(&common.out)?;
    let init = inst.ocp.constant_start();

    let run = |overlap: Overlap| -> Result<crate::schwarz::SchwarzOutput, CliError> {
        let mut cfg = SchwarzConfig::new(t, overlap);
        cfg.mu = mu;
        cfg.tol_pr = tol_pr;
        cfg.tol_du = tol_du;
        cfg.max_outer = max_outer;
        schwarz_solve(&inst.ocp, &cfg, &init).map_err(|e| match e {
            SchwarzError::InvalidPartition { .. } | SchwarzError::InvalidOverlap => input(e),
            other => numerical(other),
        })
    };

    if let Some(list) = sweep_overlap {
        let values = parse_f64_list(list)?;
        let mut rows = Vec::new();
        for v in values {
            let tick = Instant::now();
            let out = run(Overlap::Relative(v))?;
            let wall = tick.elapsed().as_secs_f64();
            log::info!("tau_rel {v}: {} outer iterations", out.outer_iters);
            rows.push((v, out.outer_iters, wall));
        }
        write_file(&common.out.join("sweep.csv"), |f| {
            use std::io::Write;
            writeln!(f, "tau_rel,outer_iters,wall_s")?;
            for (v, iters, wall) in &rows {
                writeln!(f, "{v},{iters},{wall:.6}")?;
            }
            Ok(())
        })?;
        return Ok(());
    }

    let overlap = match (tau, tau_rel) {
        (Some(s), None) => Overlap::Stages(s),
        (None, Some(r)) => Overlap::Relative(r),
        (None, None) => Overlap::Relative(0.5),
        (Some(_), Some(_)) => unreachable!("clap rejects conflicting overlap flags"),
    };
    let out = run(overlap)?;
    log::info!("converged in {} outer iterations", out.outer_iters);
    write_file(&common.out.join("convergence.csv"), |f| out.record.write_csv(f))?;
    write_file(&common.out.join("partition.csv"), |f| out.partition.write_csv(f))?;
    write_file(&common.out.join("trajectory.csv"), |f| out.traj.write_csv(f))?;
    Ok(())
}

fn cmd_eds(
    problem: &ProblemArgs,
    common: &CommonArgs,
    seed: u64,
    count: usize,
    magnitude: f64,
) -> Result<(), CliError> {
    let inst = build_instance(problem)?;
    ensure_out(&common.out)?;
    let nx = inst.ocp.nx();
    let at = sqp_solve(&inst.ocp, &inst.ocp.constant_start(), &SqpOptions::default())
        .map_err(numerical)?
        .traj;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scaled = |rng: &mut ChaCha8Rng| {
        let g = gaussian_vector(rng, nx);
        let norm = g.norm();
        if norm == 0.0 || magnitude == 0.0 {
            DVector::zeros(nx)
        } else {
            g * (magnitude / norm)
        }
    };
    let perts: Vec<EdsPerturbation> = (0..count)
        .map(|j| {
            // Alternate the perturbed boundary; only the quadrotor exposes a
            // terminal-reference shift, so other problems perturb x̄_0 only.
            let boundary = match (&inst.quad_params, j % 3) {
                (Some(_), 1) => Boundary::Terminal,
                (Some(_), 2) => Boundary::Both,
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
            let ocp = match &inst.quad_params {
                Some(params) => quadrotor_perturbed(params.clone(), &inst.ocp.x0 + &dx0, dterm),
                None => NlpOcp { x0: &inst.ocp.x0 + &dx0, ..inst.ocp.clone() },
            };
            EdsPerturbation {
                ocp,
                boundary,
                magnitude,
                descriptor: format!("{} perturbation {j}", inst.name),
            }
        })
        .collect();

    let reports = eds_probe(&at, &perts, &EdsOptions::default()).map_err(numerical)?;
    for (j, rep) in reports.iter().enumerate() {
        write_file(&common.out.join(format!("eds_{j:03}.csv")), |f| rep.write_csv(f))?;
    }
    write_file(&common.out.join("summary.csv"), |f| {
        use std::io::Write;
        writeln!(f, "index,rho_hat,upsilon_hat,boundary,magnitude")?;
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for (j, r) in reports.iter().enumerate() {
            writeln!(
                f,
                "{j},{},{},{},{:e}",
                fmt_opt(r.rho_hat),
                fmt_opt(r.upsilon_hat),
                r.boundary,
                r.magnitude
            )?;
        }
        Ok(())
    })
}

/// One row of the combined benchmark table.
struct BenchRow {
    method: &'static str,
    param: String,
    iter: usize,
    kkt: f64,
    wall_s: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_benchmark(
    problem: &ProblemArgs,
    common: &CommonArgs,
    t: usize,
    tau_rel: f64,
    tol_pr: f64,
    tol_du: f64,
    max_outer: usize,
    admm_rho: &str,
    mu_list: &str,
) -> Result<(), CliError> {
    let inst = build_instance(problem)?;
    ensure_out(&common.out)?;
    let rhos = parse_f64_list(admm_rho)?;
    let mus = parse_f64_list(mu_list)?;
    let init = inst.ocp.constant_start();
    let mut rows: Vec<BenchRow> = Vec::new();

    // Centralized SQP; its convergence decides the exit code.
    let tick = Instant::now();
    let central = sqp_solve(&inst.ocp, &init, &SqpOptions::default()).map_err(numerical)?;
    let wall = tick.elapsed().as_secs_f64();
    let n_rows = central.trace.len().max(1) as f64;
    for (i, r) in central.trace.iter().enumerate() {
        // SQP iterations are not individually timed; spread the total evenly.
        rows.push(BenchRow {
            method: "sqp",
            param: String::new(),
            iter: r.iter,
            kkt: r.stationarity.max(r.feasibility),
            wall_s: wall * (i + 1) as f64 / n_rows,
        });
    }
    rows.push(BenchRow {
        method: "sqp",
        param: String::new(),
        iter: central.iters,
        kkt: central.kkt.max(),
        wall_s: wall,
    });

    let t = t.min(inst.ocp.n);
    for &mu in &mus {
        let mut cfg = SchwarzConfig::new(t, Overlap::Relative(tau_rel));
        cfg.mu = mu;
        cfg.tol_pr = tol_pr;
        cfg.tol_du = tol_du;
        cfg.max_outer = max_outer;
        let record = match schwarz_solve(&inst.ocp, &cfg, &init) {
            Ok(out) => out.record,
            Err(SchwarzError::MaxOuterIterations(out)) => out.record,
            Err(e) => {
                log::warn!("schwarz mu={mu} failed: {e}");
                continue;
            }
        };
        let mut wall = 0.0;
        for r in &record.rows {
            wall += r.wall_s;
            rows.push(BenchRow {
                method: "schwarz",
                param: format!("{mu}"),
                iter: r.iter,
                kkt: r.kkt_stat.max(r.kkt_feas),
                wall_s: wall,
            });
        }
    }

    for &rho in &rhos {
        let mut cfg = AdmmConfig::new(t, rho);
        cfg.tol_pr = tol_pr;
        cfg.tol_du = tol_du;
        cfg.max_iters = max_outer;
        let record = match admm_solve(&inst.ocp, &cfg, &init) {
            Ok(out) => out.record,
            Err(e) => {
                log::warn!("admm rho={rho} failed: {e}");
                continue;
            }
        };
        let mut wall = 0.0;
        for r in &record.rows {
            wall += r.wall_s;
            rows.push(BenchRow {
                method: "admm",
                param: format!("{rho}"),
                iter: r.iter,
                kkt: r.kkt_stat.max(r.kkt_feas),
                wall_s: wall,
            });
        }
    }

    write_file(&common.out.join("benchmark.csv"), |f| {
        use std::io::Write;
        writeln!(f, "method,param,iter,kkt_residual,wall_s")?;
        for r in &rows {
            writeln!(f, "{},{},{},{:e},{:.6}", r.method, r.param, r.iter, r.kkt, r.wall_s)?;
        }
        Ok(())
    })
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| input(format!("bad list entry {v:?}: {e}"))))
        .collect()
}

fn set_workers(common: &CommonArgs) -> Result<(), CliError> {
    if let Some(w) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| input(format!("cannot configure {w} workers: {e}")))?;
    }
    Ok(())
}

/// Parses arguments, dispatches, and returns the process exit code.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SCHWARZ_OCP_LOG")).init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Command::Solve { problem, common, tol, max_iters } => {
            set_workers(common).and_then(|()| cmd_solve(problem, common, *tol, *max_iters))
        }
        Command::Schwarz {
            problem,
            common,
            t,
            tau,
            tau_rel,
            mu,
            tol_pr,
            tol_du,
            max_outer,
            sweep_overlap,
        } => set_workers(common).and_then(|()| {
            cmd_schwarz(
                problem,
                common,
                *t,
                *tau,
                *tau_rel,
                *mu,
                *tol_pr,
                *tol_du,
                *max_outer,
                sweep_overlap.as_deref(),
            )
        }),
        Command::Eds { problem, common, seed, perturbations, magnitude } => set_workers(common)
            .and_then(|()| cmd_eds(problem, common, *seed, *perturbations, *magnitude)),
        Command::Benchmark {
            problem,
            common,
            t,
            tau_rel,
            tol_pr,
            tol_du,
            max_outer,
            admm_rho,
            mu,
        } => set_workers(common).and_then(|()| {
            cmd_benchmark(
                problem, common, *t, *tau_rel, *tol_pr, *tol_du, *max_outer, admm_rho, mu,
            )
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
