//! Orchestration of the alternative: the auxiliary problem is checked for a
//! nonzero solution; if there is none, a convex family of coefficients `α`
//! is searched for one with three solutions and two equal-energy minima.

mod alternative;
mod branches;
mod family;
mod theta;

pub use alternative::{check_alternative, AlternativeResult, NONTRIVIAL_TOL};
pub use branches::{
    bisect_bracket, branch_energies, equalize_alpha, probe_branches, scan_segment, BracketScan,
    BranchEnergies, EqualizeOptions, Equalization,
};
pub use family::{AlphaFamily, FamilyKind, Segment};
pub use theta::{
    estimate_theta_star, estimate_theta_tilde, ThetaStar, ThetaTildePoint, THETA_STAR_SCALES,
};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::discretization::{smallest_eigenpair, Field};
use crate::energy::{Equation, ProblemConfig};
use crate::error::{Error, Result};
use crate::nonlinearity::{check_condition16, Condition16Report, ThresholdReport};
use crate::solvers::{hessian_flag, minima_pair, HessianFlag, MinimaPair, Origin, SolverOptions, Starts};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct ExploreOptions {
    pub equalize: EqualizeOptions,
    pub radii: Vec<f64>,
    /// `t` range of the segment; `None` means `[-2λ, 0]`, clipped to the family box.
    pub segment: Option<(f64, f64)>,
    /// Segment direction in coefficient space; `None` uses the family default.
    pub direction: Option<Vec<f64>>,
    pub condition16_radius: f64,
    pub condition16_samples: usize,
    pub eigen_tol: f64,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self {
            equalize: EqualizeOptions::default(),
            radii: vec![1.0, 10.0, 100.0],
            segment: None,
            direction: None,
            condition16_radius: 1e3,
            condition16_samples: 100_001,
            eigen_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveBranch {
    /// The auxiliary problem has a nonzero solution.
    NontrivialAuxiliary,
    /// Only the zero auxiliary solution was found; the α-search applies.
    AlphaSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
    HypothesisViolation,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub status: String,
    pub exit_code: i32,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaReport {
    pub family: FamilyKind,
    pub bound: f64,
    pub segment: Segment,
    pub t_star: f64,
    pub coefficients: Vec<f64>,
    pub sup_norm: f64,
    pub j_pos: f64,
    pub j_neg: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub bisection_iterations: usize,
    #[serde(skip)]
    pub field: Field,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub index: usize,
    pub energy: f64,
    pub residual_norm: f64,
    pub l2_norm: f64,
    /// `⟨u, v₁⟩_M`
    pub projection_v1: f64,
    pub origin: Origin,
    pub hessian: HessianFlag,
    /// File name of the CSV written by the command line tool.
    pub csv: Option<String>,
    #[serde(skip)]
    pub u: Vec<f64>,
}

/// Stationarity of `Φ` at a solution `u` of the main problem.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleDiagnostic {
    pub index: usize,
    /// `‖∂Φ/∂u (u, α*)‖`, the main residual.
    pub du_at_alpha: f64,
    /// `‖∂Φ/∂y (u, -F(u))‖`
    pub dy_at_maximizer: f64,
    /// `‖∂Φ/∂u (u, -F(u))‖`, the auxiliary residual; informational.
    pub du_at_maximizer: f64,
    pub pass: bool,
}

pub const SADDLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ExplorationReport {
    pub schema_version: u32,
    pub config_echo: BTreeMap<String, String>,
    pub lambda1: Option<f64>,
    pub thresholds: Option<ThresholdReport>,
    pub condition16: Option<Condition16Report>,
    pub alternative: Option<AlternativeResult>,
    pub alpha: Option<AlphaReport>,
    pub solutions: Vec<SolutionSummary>,
    pub minima_pair: Option<MinimaPair>,
    pub theta_star: Option<ThetaStar>,
    pub theta_tilde_trend: Vec<ThetaTildePoint>,
    pub timings_ms: BTreeMap<String, f64>,
    pub seed: u64,
    pub lambda: f64,
    pub lambda_in_interval: Option<bool>,
    pub active_branch: Option<ActiveBranch>,
    /// `θ* estimate < λ`, a soft consistency check.
    pub lambda_exceeds_theta_star: Option<bool>,
    pub branch_table: Vec<BranchEnergies>,
    pub saddle_diagnostics: Vec<SaddleDiagnostic>,
    pub stages: Vec<StageRecord>,
    pub outcome: Outcome,
}

impl ExplorationReport {
    pub fn exit_code(&self) -> i32 {
        self.outcome.exit_code
    }

    /// Report as JSON without the `timings_ms` field.
    pub fn without_timings(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings_ms");
        }
        Ok(v)
    }
}

const STAGES: [&str; 10] = [
    "eigen",
    "thresholds",
    "condition16",
    "alternative",
    "bracket",
    "equalize",
    "minima",
    "saddle",
    "theta_star",
    "theta_tilde",
];

struct Recorder {
    stages: Vec<StageRecord>,
    timings: BTreeMap<String, f64>,
}

impl Recorder {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings
            .insert(name.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }

    fn record(&mut self, name: &str, status: StageStatus, detail: Option<String>) {
        self.stages.push(StageRecord {
            name: name.to_string(),
            status,
            detail,
        });
    }

    fn skip_rest(&mut self, reason: &str) {
        for name in STAGES {
            if !self.stages.iter().any(|s| s.name == name) {
                self.record(name, StageStatus::Skipped, Some(reason.to_string()));
            }
        }
    }
}

fn outcome_of(err: Option<&Error>) -> Outcome {
    match err {
        None => Outcome {
            status: "ok".into(),
            exit_code: 0,
            message: None,
        },
        Some(e) => Outcome {
            status: match e {
                Error::Hypothesis(_) => "hypothesis_violation",
                Error::SearchFailure(_) => "search_failure",
                _ => "internal_error",
            }
            .into(),
            exit_code: e.exit_code(),
            message: Some(e.to_string()),
        },
    }
}

/// Default segment `[-2λ, 0]` along `direction`, clipped to the family box.
pub fn default_segment(family: &AlphaFamily, direction: Vec<f64>, lambda: f64) -> Result<Segment> {
    let reach = family.max_step(&direction);
    let lo = -(2.0 * lambda).min(reach);
    Segment::new(family, direction, lo, 0.0)
}

/// Runs the full pipeline. The report is always produced; its `outcome`
/// carries the exit status (0 success, 1 internal, 2 hypothesis, 3 search).
pub fn explore(
    cfg: &ProblemConfig,
    family: &AlphaFamily,
    gamma: Option<f64>,
    solver: &SolverOptions,
    opts: &ExploreOptions,
) -> ExplorationReport {
    let mut rec = Recorder {
        stages: Vec::new(),
        timings: BTreeMap::new(),
    };
    let mut report = ExplorationReport {
        schema_version: SCHEMA_VERSION,
        config_echo: BTreeMap::new(),
        lambda1: None,
        thresholds: None,
        condition16: None,
        alternative: None,
        alpha: None,
        solutions: Vec::new(),
        minima_pair: None,
        theta_star: None,
        theta_tilde_trend: Vec::new(),
        timings_ms: BTreeMap::new(),
        seed: solver.rng_seed,
        lambda: cfg.lambda,
        lambda_in_interval: None,
        active_branch: None,
        lambda_exceeds_theta_star: None,
        branch_table: Vec::new(),
        saddle_diagnostics: Vec::new(),
        stages: Vec::new(),
        outcome: outcome_of(None),
    };
    let err = run_pipeline(cfg, family, gamma, solver, opts, &mut report, &mut rec).err();
    if let Some(e) = &err {
        rec.skip_rest(&format!("not run: {e}"));
    }
    report.outcome = outcome_of(err.as_ref());
    report.stages = rec.stages;
    report.timings_ms = rec.timings;
    report
}

fn run_pipeline(
    cfg: &ProblemConfig,
    family: &AlphaFamily,
    gamma: Option<f64>,
    solver: &SolverOptions,
    opts: &ExploreOptions,
    report: &mut ExplorationReport,
    rec: &mut Recorder,
) -> Result<()> {
    solver.validate()?;
    let ep = rec
        .time("eigen", || smallest_eigenpair(&cfg.disc.stiffness, &cfg.disc.mass, opts.eigen_tol))
        .inspect_err(|e| rec.record("eigen", StageStatus::Failed, Some(e.to_string())))?;
    rec.record("eigen", StageStatus::Ok, None);
    report.lambda1 = Some(ep.lambda);
    let starts = Starts::from_eigenpair(&cfg.disc, &ep, solver);

    let thresholds = rec.time("thresholds", || ThresholdReport::build(&cfg.f, &cfg.g, gamma, ep.lambda));
    let thresholds = match thresholds {
        Ok(t) => t,
        Err(e) => {
            let status = if matches!(e, Error::Hypothesis(_)) {
                StageStatus::HypothesisViolation
            } else {
                StageStatus::Failed
            };
            rec.record("thresholds", status, Some(e.to_string()));
            return Err(e);
        }
    };
    let inside = thresholds.contains(cfg.lambda);
    report.lambda_in_interval = Some(inside);
    let (lo, hi) = (thresholds.lambda_lo, thresholds.lambda_hi);
    report.thresholds = Some(thresholds);
    if !inside {
        let msg = format!("lambda = {} lies outside the admissible interval ({lo}, {hi})", cfg.lambda);
        rec.record("thresholds", StageStatus::HypothesisViolation, Some(msg.clone()));
        return Err(Error::Hypothesis(msg));
    }
    rec.record("thresholds", StageStatus::Ok, None);

    let c16 = rec.time("condition16", || {
        check_condition16(&cfg.f, &cfg.g, cfg.lambda, opts.condition16_radius, opts.condition16_samples)
    })?;
    rec.record(
        "condition16",
        StageStatus::Ok,
        Some(format!("pass = {}", c16.pass)),
    );
    report.condition16 = Some(c16);

    let alt = rec.time("alternative", || check_alternative(cfg, solver, &starts.list))?;
    let nontrivial = alt.nontrivial_found;
    rec.record(
        "alternative",
        StageStatus::Ok,
        Some(format!("nontrivial_found = {nontrivial}")),
    );
    report.alternative = Some(alt);

    if nontrivial {
        report.active_branch = Some(ActiveBranch::NontrivialAuxiliary);
        for name in ["bracket", "equalize", "minima", "saddle"] {
            rec.record(
                name,
                StageStatus::Skipped,
                Some("nonzero auxiliary solution found; alpha search not required".into()),
            );
        }
    } else {
        report.active_branch = Some(ActiveBranch::AlphaSearch);
        alpha_search(cfg, family, &starts, solver, opts, report, rec)?;
    }

    theta_stages(cfg, &starts, opts, report, rec);
    Ok(())
}

fn alpha_search(
    cfg: &ProblemConfig,
    family: &AlphaFamily,
    starts: &Starts,
    solver: &SolverOptions,
    opts: &ExploreOptions,
    report: &mut ExplorationReport,
    rec: &mut Recorder,
) -> Result<()> {
    let direction = opts.direction.clone().unwrap_or_else(|| family.default_direction());
    let segment = match opts.segment {
        Some((lo, hi)) => Segment::new(family, direction, lo, hi)?,
        None => default_segment(family, direction, cfg.lambda)?,
    };

    let scan = rec.time("bracket", || scan_segment(cfg, family, &segment, starts, solver, &opts.equalize))?;
    report.branch_table = scan.table.clone();
    if scan.bracket.is_none() {
        let msg = format!(
            "no sign change of J_pos - J_neg over t in [{}, {}] on {} grid points",
            segment.lo, segment.hi, opts.equalize.grid_points
        );
        rec.record("bracket", StageStatus::Failed, Some(msg.clone()));
        return Err(Error::SearchFailure(msg));
    }
    rec.record("bracket", StageStatus::Ok, None);

    let eq = rec.time("equalize", || {
        bisect_bracket(cfg, family, &segment, &scan, starts, solver, &opts.equalize)
    });
    let eq = eq.inspect_err(|e| rec.record("equalize", StageStatus::Failed, Some(e.to_string())))?;
    rec.record(
        "equalize",
        StageStatus::Ok,
        Some(format!("{} solutions at t* = {}", eq.solutions.len(), eq.t_star)),
    );
    report.branch_table.extend(eq.bisection.iter().cloned());
    report
        .branch_table
        .sort_by(|a, b| a.t.total_cmp(&b.t));

    let cfg_star = cfg.with_alpha(eq.alpha.clone())?;
    let pair = rec.time("minima", || -> Result<_> {
        let pair = minima_pair(&eq.solutions, &cfg_star)?;
        let mut summaries = Vec::new();
        for (index, s) in eq.solutions.members.iter().enumerate() {
            let projection_v1 = s
                .u
                .iter()
                .zip(&starts.v1)
                .zip(cfg.disc.mass_diag())
                .map(|((u, v), m)| m * u * v)
                .sum();
            summaries.push(SolutionSummary {
                index,
                energy: s.energy,
                residual_norm: s.residual_norm,
                l2_norm: s.l2_norm,
                projection_v1,
                origin: s.origin,
                hessian: hessian_flag(&cfg_star, Equation::Main, &s.u)?,
                csv: None,
                u: s.u.clone(),
            });
        }
        Ok((pair, summaries))
    })?;
    let (pair, summaries) = pair;
    rec.record(
        "minima",
        StageStatus::Ok,
        Some(format!("both_minima = {}", pair.both_minima)),
    );

    report.saddle_diagnostics = rec.time("saddle", || {
        summaries
            .iter()
            .map(|s| saddle_diagnostic(&cfg_star, s.index, &s.u))
            .collect()
    });
    let all_pass = report.saddle_diagnostics.iter().all(|d| d.pass);
    rec.record("saddle", StageStatus::Ok, Some(format!("all_pass = {all_pass}")));

    report.alpha = Some(AlphaReport {
        family: family.kind(),
        bound: family.bound(),
        segment,
        t_star: eq.t_star,
        sup_norm: eq.alpha.values().iter().fold(0.0f64, |m, a| m.max(a.abs())),
        coefficients: eq.coefficients.clone(),
        j_pos: eq.j_pos,
        j_neg: eq.j_neg,
        gap: eq.gap,
        relative_gap: eq.relative_gap,
        bisection_iterations: eq.bisection_iterations,
        field: eq.alpha.clone(),
    });
    report.minima_pair = Some(pair);
    report.solutions = summaries;
    Ok(())
}

/// Stationarity of `Φ` at `(u, α)` in `u` and at `(u, -F(u))` in `y`.
pub fn saddle_diagnostic(cfg: &ProblemConfig, index: usize, u: &[f64]) -> SaddleDiagnostic {
    let (du, _) = cfg.saddle_gradients(u, cfg.alpha.values());
    let y = cfg.saddle_maximizer(u);
    let (du_y, dy) = cfg.saddle_gradients(u, &y);
    let du_at_alpha = cfg.residual_norm(&du);
    let dy_at_maximizer = cfg.residual_norm(&dy);
    SaddleDiagnostic {
        index,
        du_at_alpha,
        dy_at_maximizer,
        du_at_maximizer: cfg.residual_norm(&du_y),
        pass: du_at_alpha <= SADDLE_TOL && dy_at_maximizer <= SADDLE_TOL,
    }
}

fn theta_stages(
    cfg: &ProblemConfig,
    starts: &Starts,
    opts: &ExploreOptions,
    report: &mut ExplorationReport,
    rec: &mut Recorder,
) {
    match rec.time("theta_star", || estimate_theta_star(cfg, &starts.v1)) {
        Ok(t) => {
            report.lambda_exceeds_theta_star = Some(cfg.lambda > t.estimate);
            report.theta_star = Some(t);
            rec.record("theta_star", StageStatus::Ok, None);
        }
        Err(e) => rec.record("theta_star", StageStatus::Failed, Some(e.to_string())),
    }
    let probe: Vec<Vec<f64>> = starts.list.iter().skip(1).map(|s| s.u.clone()).collect();
    match rec.time("theta_tilde", || estimate_theta_tilde(cfg, &probe, &opts.radii)) {
        Ok(trend) => {
            report.theta_tilde_trend = trend;
            rec.record("theta_tilde", StageStatus::Ok, None);
        }
        Err(e) => rec.record("theta_tilde", StageStatus::Failed, Some(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::discretization::{build_mesh, Discretization};
    use crate::nonlinearity::Nonlinearity;

    fn base(n: usize, f: Nonlinearity, lambda: f64) -> (ProblemConfig, AlphaFamily) {
        let disc = Arc::new(Discretization::new(build_mesh(1, n, &[1.0]).unwrap()));
        let family = AlphaFamily::new(FamilyKind::Constants, 100.0, &disc.mesh).unwrap();
        let alpha = Field::zeros(&disc.mesh);
        let cfg = ProblemConfig::new(disc, f, Nonlinearity::plus_power(3.0).unwrap(), lambda, alpha).unwrap();
        (cfg, family)
    }

    fn quick() -> ExploreOptions {
        ExploreOptions {
            condition16_samples: 2001,
            ..Default::default()
        }
    }

    #[test]
    fn lambda_below_interval_stops_early() {
        let lambda: f64 = 5.0;
        let (cfg, fam) = base(40, Nonlinearity::constant(lambda.sqrt()).unwrap(), lambda);
        let r = explore(&cfg, &fam, Some(1.0), &SolverOptions::default(), &quick());
        assert_eq!(r.exit_code(), 2);
        assert_eq!(r.lambda_in_interval, Some(false));
        assert!(r.alternative.is_none() && r.alpha.is_none());
        assert_eq!(r.stages.len(), STAGES.len());
        let skipped = r.stages.iter().filter(|s| s.status == StageStatus::Skipped).count();
        assert_eq!(skipped, STAGES.len() - 2);
    }

    #[test]
    fn auxiliary_witness_ends_at_first_branch() {
        let (cfg, fam) = base(40, Nonlinearity::constant(0.0).unwrap(), 2.0 * 9.87);
        let r = explore(&cfg, &fam, None, &SolverOptions::default(), &quick());
        assert_eq!(r.exit_code(), 0, "{:?}", r.outcome);
        assert!(!r.condition16.as_ref().unwrap().pass);
        assert!(r.alternative.as_ref().unwrap().nontrivial_found);
        assert_eq!(r.active_branch, Some(ActiveBranch::NontrivialAuxiliary));
        assert!(r.alpha.is_none() && r.solutions.is_empty());
        let st = |n: &str| r.stages.iter().find(|s| s.name == n).unwrap().status;
        assert_eq!(st("equalize"), StageStatus::Skipped);
        assert_eq!(st("theta_star"), StageStatus::Ok);
    }

    #[test]
    fn reference_config_finds_three_solutions() {
        let lambda: f64 = 2.0 * 9.87;
        let (cfg, fam) = base(60, Nonlinearity::constant(lambda.sqrt()).unwrap(), lambda);
        let r = explore(&cfg, &fam, Some(1.0), &SolverOptions::default(), &quick());
        assert_eq!(r.exit_code(), 0, "{:?}", r.outcome);
        assert_eq!(r.active_branch, Some(ActiveBranch::AlphaSearch));
        assert!(r.solutions.len() >= 3);
        let pair = r.minima_pair.as_ref().unwrap();
        assert!(pair.both_minima && pair.relative_gap <= 1e-8);
        assert!(r.solutions.iter().any(|s| !s.hessian.local_minimum));
        assert!(r.saddle_diagnostics.iter().all(|d| d.pass));
        assert_eq!(r.lambda_exceeds_theta_star, Some(true));
    }

    #[test]
    fn segment_without_crossing_is_search_failure() {
        let lambda: f64 = 2.0 * 9.87;
        let (cfg, fam) = base(40, Nonlinearity::constant(lambda.sqrt()).unwrap(), lambda);
        let opts = ExploreOptions {
            segment: Some((-0.05, 0.0)),
            ..quick()
        };
        let r = explore(&cfg, &fam, Some(1.0), &SolverOptions::default(), &opts);
        assert_eq!(r.exit_code(), 3);
        assert!(!r.branch_table.is_empty());
        assert!(r.outcome.message.as_ref().unwrap().contains("no sign change"));
    }
}
