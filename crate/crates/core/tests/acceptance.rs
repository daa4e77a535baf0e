//! Acceptance criteria 1-8. Runs as a plain binary (`harness = false`) so
//! every criterion prints one PASS/FAIL line.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trisolve::cli::{build_problem, load_config, Problem};
use trisolve::discretization::{build_mesh, smallest_eigenpair, Discretization, Field};
use trisolve::energy::{gradient_check, ProblemConfig};
use trisolve::explorer::{check_alternative, explore, ExploreOptions, ExplorationReport};
use trisolve::nonlinearity::{
    check_condition16, gamma_corollary2, rho_sigma, scale_f_corollary2, Exactness, Nonlinearity, ThresholdReport,
};
use trisolve::solvers::{SolverOptions, Starts};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(rel)
}

fn reference() -> Problem {
    let cfg = load_config(&config_path("reference.conf")).expect("reference config loads");
    build_problem(&cfg).expect("reference problem builds")
}

fn reference_explore_options() -> ExploreOptions {
    let cfg = load_config(&config_path("reference.conf")).unwrap();
    ExploreOptions {
        equalize: cfg.equalize,
        radii: cfg.radii.clone(),
        segment: cfg.alpha.segment,
        direction: cfg.alpha.direction.clone(),
        condition16_radius: cfg.check_radius,
        condition16_samples: cfg.check_samples,
        eigen_tol: cfg.eigen_tol,
    }
}

fn eigen_accuracy() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (dim, n, exact, tol) in [(1, 1024, PI * PI, 1e-3), (2, 64, 2.0 * PI * PI, 1e-2)] {
        let start = Instant::now();
        let disc = Discretization::new(build_mesh(dim, n, &vec![1.0; dim]).unwrap());
        let ep = smallest_eigenpair(&disc.stiffness, &disc.mass, 1e-10).unwrap();
        let elapsed = start.elapsed();
        let rel = (ep.lambda - exact).abs() / exact;
        pass &= rel <= tol && elapsed < Duration::from_secs(5);
        parts.push(format!(
            "{dim}D n={n}: lambda1={:.7} rel={rel:.2e} (tol {tol:e}) in {:.2}s",
            ep.lambda,
            elapsed.as_secs_f64()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn gradient_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut parts = Vec::new();
    let mut pass = true;
    for (dim, n) in [(1, 64), (2, 16)] {
        let disc = Arc::new(Discretization::new(build_mesh(dim, n, &vec![1.0; dim]).unwrap()));
        let lambda1 = smallest_eigenpair(&disc.stiffness, &disc.mass, 1e-10).unwrap().lambda;
        let lambda = 2.0 * lambda1;
        let f = scale_f_corollary2(&Nonlinearity::constant_one(), lambda, 1.0).unwrap();
        let g = Nonlinearity::plus_power(3.0).unwrap();
        let mut worst = 0.0f64;
        let mut worst_quad = 0.0f64;
        for _ in 0..100 {
            let alpha = Field::new(&disc.mesh, random_vec(&mut rng, disc.n())).unwrap();
            let u = random_vec(&mut rng, disc.n());
            let v = random_vec(&mut rng, disc.n());
            let cfg = ProblemConfig::new(disc.clone(), f.clone(), g.clone(), lambda, alpha.clone()).unwrap();
            worst = worst.max(gradient_check(&u, &v, &cfg, 1e-5).unwrap().relative);
            let quad = ProblemConfig::new(disc.clone(), Nonlinearity::constant_one(), g.clone(), 0.0, alpha).unwrap();
            worst_quad = worst_quad.max(gradient_check(&u, &v, &quad, 1e-5).unwrap().relative);
        }
        pass &= worst <= 1e-6 && worst_quad <= 1e-10;
        parts.push(format!("{dim}D n={n}: worst {worst:.2e} (<=1e-6), quadratic {worst_quad:.2e} (<=1e-10)"));
    }
    outcome(pass, parts.join("; "))
}

fn hypothesis_machinery() -> Outcome {
    let p = reference();
    let g = Nonlinearity::plus_power(3.0).unwrap();
    let rs = rho_sigma(&g);
    let rs_ok = rs.rho == 0.0 && rs.sigma == 0.5 && rs.exactness == Exactness::Exact;
    let gamma = gamma_corollary2(&Nonlinearity::constant_one()).unwrap();
    let t = ThresholdReport::build(&p.problem.f, &p.problem.g, p.gamma, p.eigen.lambda).unwrap();
    let interval_ok = t.lambda_lo == p.eigen.lambda && t.lambda_hi == f64::INFINITY;
    let c16 = check_condition16(&p.problem.f, &p.problem.g, p.problem.lambda, 1e3, 100_001).unwrap();
    let pass = rs_ok && gamma == 1.0 && interval_ok && c16.sup <= 1e-12 && c16.pass;
    outcome(
        pass,
        format!(
            "(rho, sigma) = ({}, {}) {:?}; interval = ({}, {}); gamma = {gamma}; condition16 sup = {:e} over {} samples",
            rs.rho, rs.sigma, rs.exactness, t.lambda_lo, t.lambda_hi, c16.sup, c16.samples
        ),
    )
}

fn alternative_refuted() -> Outcome {
    let p = reference();
    let opts = SolverOptions::default();
    let start = Instant::now();
    let starts = Starts::from_eigenpair(&p.problem.disc, &p.eigen, &opts);
    let alt = check_alternative(&p.problem, &opts, &starts.list).unwrap();
    let elapsed = start.elapsed();
    let max = alt.solutions.members.iter().map(|s| s.l2_norm).fold(0.0, f64::max);
    let pass = starts.list.len() >= 20 && !alt.nontrivial_found && max <= 1e-8 && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{} starts, {} solutions, max L2 norm {max:e}, {} rounds ({} deflated runs found nothing new), {:.2}s",
            starts.list.len(),
            alt.solutions.len(),
            alt.solutions.rounds,
            alt.solutions.failures.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn three_solutions(r: &ExplorationReport, p: &Problem, elapsed: Duration) -> Outcome {
    let Some(alpha) = &r.alpha else {
        return outcome(false, format!("no alpha found: {:?}", r.outcome));
    };
    let gap_ok = alpha.gap.abs() <= 1e-8 * (1.0 + alpha.j_pos.abs());
    let sols = &r.solutions;
    let mut min_dist = f64::INFINITY;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            let d: Vec<f64> = sols[i].u.iter().zip(&sols[j].u).map(|(a, b)| a - b).collect();
            min_dist = min_dist.min(p.problem.disc.l2_norm(&d));
        }
    }
    let max_res = sols.iter().map(|s| s.residual_norm).fold(0.0, f64::max);
    let minima_ok = sols.len() >= 3 && sols[0].hessian.local_minimum && sols[1].hessian.local_minimum;
    let saddle_ok = sols.iter().skip(2).any(|s| !s.hessian.local_minimum && s.hessian.min_eigenvalue < 0.0);
    let pass = r.exit_code() == 0
        && gap_ok
        && sols.len() >= 3
        && min_dist > 1e-3
        && max_res <= 1e-9
        && minima_ok
        && saddle_ok
        && elapsed < Duration::from_secs(600);
    let eigs: Vec<String> = sols.iter().map(|s| format!("{:.3}", s.hessian.min_eigenvalue)).collect();

    // an engineered segment without a crossing must exit with status 3
    let bin = env!("CARGO_BIN_EXE_trisolve");
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args(["explore", "--config"])
        .arg(config_path("fixtures/no_bracket.conf"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    let code = status.status.code();
    outcome(
        pass && code == Some(3),
        format!(
            "t* = {:.6}, |gap| = {:.2e} (tol {:.2e}), {} solutions, min distance {min_dist:.3e}, max residual {max_res:.2e}, \
             hessian min eigenvalues [{}], {:.2}s; no-bracket fixture exit {:?}",
            alpha.t_star,
            alpha.gap.abs(),
            1e-8 * (1.0 + alpha.j_pos.abs()),
            sols.len(),
            eigs.join(", "),
            elapsed.as_secs_f64(),
            code
        ),
    )
}

fn saddle(r: &ExplorationReport) -> Outcome {
    let d = &r.saddle_diagnostics;
    let du = d.iter().map(|x| x.du_at_alpha).fold(0.0, f64::max);
    let dy = d.iter().map(|x| x.dy_at_maximizer).fold(0.0, f64::max);
    let aux = d.iter().map(|x| x.du_at_maximizer).fold(f64::INFINITY, f64::min);
    outcome(
        d.len() >= 3 && du <= 1e-8 && dy <= 1e-8,
        format!(
            "{} solutions: max |dPhi/du(u, alpha*)| = {du:.2e}, max |dPhi/dy(u, -F(u))| = {dy:.2e}; \
             auxiliary residual dPhi/du(u, -F(u)) >= {aux:.3} (nonzero, as only u = 0 solves it)",
            d.len()
        ),
    )
}

fn theta_consistency(r: &ExplorationReport, p: &Problem) -> Outcome {
    let Some(t) = &r.theta_star else {
        return outcome(false, "theta_star not computed");
    };
    let l1 = p.eigen.lambda;
    let pass = t.estimate <= l1 * (1.0 + 1e-3) && p.problem.lambda > t.estimate;
    outcome(
        pass,
        format!(
            "theta* = {:.8} <= lambda1 (1 + 1e-3) = {:.8}; lambda = {:.8}",
            t.estimate,
            l1 * (1.0 + 1e-3),
            p.problem.lambda
        ),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_trisolve");
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let status = Command::new(bin)
            .args(["explore", "--seed", "7", "--config"])
            .arg(config_path("reference.conf"))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap()
            .status;
        if !status.success() {
            return outcome(false, format!("run {run} exited with {status}"));
        }
        let text = std::fs::read_to_string(out.join("explore.json")).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let obj = v.as_object_mut().unwrap();
        obj.remove("timings_ms");
        obj["config_echo"].as_object_mut().unwrap().remove("output.dir");
        reports.push(serde_json::to_string(&v).unwrap());
    }
    outcome(
        reports[0] == reports[1],
        format!("two explore runs with seed 7: {} bytes each, identical modulo timings", reports[0].len()),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "eigenvalue accuracy", eigen_accuracy()),
        (2, "gradient exactness", gradient_exactness()),
        (3, "hypothesis machinery", hypothesis_machinery()),
        (4, "auxiliary problem has only u = 0", alternative_refuted()),
    ];

    let p = reference();
    let start = Instant::now();
    let report = explore(&p.problem, &p.family, p.gamma, &SolverOptions::default(), &reference_explore_options());
    let elapsed = start.elapsed();
    results.push((5, "three solutions with an equal-energy minima pair", three_solutions(&report, &p, elapsed)));
    results.push((6, "saddle diagnostics", saddle(&report)));
    results.push((7, "theta* consistency", theta_consistency(&report, &p)));
    results.push((8, "determinism", determinism()));

    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
