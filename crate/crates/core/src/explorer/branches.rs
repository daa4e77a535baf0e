use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::Field;
use crate::energy::{Equation, ProblemConfig};
use crate::error::{Error, Result};
use crate::explorer::family::{AlphaFamily, Segment};
use crate::solvers::{
    multistart_with, newton_solve, ProblemSystem, SolutionSet, SolverOptions, Starts, MODE_MULTIPLES,
};

/// Lowest energies on the positive and negative side of `v₁` at one `t`.
#[derive(Debug, Clone, Serialize)]
pub struct BranchEnergies {
    pub t: f64,
    /// `None` when no start converged to a solution on that side.
    pub j_pos: Option<f64>,
    pub j_neg: Option<f64>,
    #[serde(skip)]
    pub u_pos: Option<Vec<f64>>,
    #[serde(skip)]
    pub u_neg: Option<Vec<f64>>,
}

impl BranchEnergies {
    /// `J_pos - J_neg`, with a lost branch counting as infinitely
    /// unfavourable. `None` when both are lost.
    pub fn gap(&self) -> Option<f64> {
        match (self.j_pos, self.j_neg) {
            (Some(p), Some(n)) => Some(p - n),
            (None, Some(_)) => Some(f64::INFINITY),
            (Some(_), None) => Some(f64::NEG_INFINITY),
            (None, None) => None,
        }
    }
}

/// Newton from `±t v₁` for each built-in multiple; every converged solution
/// is assigned to the positive side if `⟨u, v₁⟩_M > 1e-12` and to the
/// negative side otherwise, and each side keeps its lowest energy.
const ZERO_PROJECTION: f64 = 1e-12;

pub fn probe_branches(cfg: &ProblemConfig, t: f64, starts: &Starts, opts: &SolverOptions) -> BranchEnergies {
    let sys = ProblemSystem::new(cfg, Equation::Main);
    let mut list = starts.mode_side(true);
    list.extend(starts.mode_side(false));
    let results: Vec<_> = list.par_iter().map(|s| newton_solve(&sys, &s.u, opts)).collect();
    let m = cfg.disc.mass_diag();
    let mut best: [Option<(f64, Vec<f64>)>; 2] = [None, None];
    for res in results.into_iter().flatten() {
        let proj: f64 = res.u.iter().zip(&starts.v1).zip(m).map(|((u, v), m)| m * u * v).sum();
        // roundoff-sized projections count as zero, which belongs to the negative side
        let side = usize::from(proj <= ZERO_PROJECTION);
        let j = cfg.energy(&res.u);
        if best[side].as_ref().is_none_or(|(b, _)| j < *b) {
            best[side] = Some((j, res.u));
        }
    }
    let [pos, neg] = best;
    BranchEnergies {
        t,
        j_pos: pos.as_ref().map(|p| p.0),
        j_neg: neg.as_ref().map(|n| n.0),
        u_pos: pos.map(|p| p.1),
        u_neg: neg.map(|n| n.1),
    }
}

/// [`probe_branches`], failing when either side is lost.
pub fn branch_energies(cfg: &ProblemConfig, starts: &Starts, opts: &SolverOptions) -> Result<(f64, f64)> {
    let b = probe_branches(cfg, f64::NAN, starts, opts);
    match (b.j_pos, b.j_neg) {
        (Some(p), Some(n)) => Ok((p, n)),
        (p, n) => Err(Error::SearchFailure(format!(
            "branch lost: no solution on the {} side of v1 from starts {:?}",
            match (p, n) {
                (None, None) => "positive or negative",
                (None, _) => "positive",
                _ => "negative",
            },
            MODE_MULTIPLES
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EqualizeOptions {
    /// Stop once `|J_pos - J_neg| <= tol_gap * (1 + |J_pos|)`.
    pub tol_gap: f64,
    pub grid_points: usize,
    pub max_bisect: usize,
}

impl Default for EqualizeOptions {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            grid_points: 16,
            max_bisect: 60,
        }
    }
}

fn cfg_at(base: &ProblemConfig, family: &AlphaFamily, segment: &Segment, t: f64) -> Result<ProblemConfig> {
    base.with_alpha(family.field(&segment.coefficients(t))?)
}

fn within_tol(b: &BranchEnergies, tol: f64) -> bool {
    match (b.j_pos, b.j_neg) {
        (Some(p), Some(n)) => (p - n).abs() <= tol * (1.0 + p.abs()),
        _ => false,
    }
}

/// Coarse scan of the segment and the first sign change of `J_pos - J_neg`.
#[derive(Debug, Clone, Serialize)]
pub struct BracketScan {
    pub table: Vec<BranchEnergies>,
    /// Indices `(i, i + 1)` into `table` whose gaps have opposite signs,
    /// or a single index where the gap already meets the tolerance.
    pub bracket: Option<(usize, usize)>,
}

pub fn scan_segment(
    base: &ProblemConfig,
    family: &AlphaFamily,
    segment: &Segment,
    starts: &Starts,
    solver: &SolverOptions,
    opts: &EqualizeOptions,
) -> Result<BracketScan> {
    let ts = segment.grid(opts.grid_points);
    let table: Vec<BranchEnergies> = ts
        .par_iter()
        .map(|&t| cfg_at(base, family, segment, t).map(|cfg| probe_branches(&cfg, t, starts, solver)))
        .collect::<Result<_>>()?;
    let mut bracket = None;
    for (i, b) in table.iter().enumerate() {
        if within_tol(b, opts.tol_gap) {
            bracket = Some((i, i));
            break;
        }
        if let (Some(g0), Some(g1)) = (b.gap(), table.get(i + 1).and_then(|n| n.gap())) {
            if g0.signum() != g1.signum() {
                bracket = Some((i, i + 1));
                break;
            }
        }
    }
    Ok(BracketScan { table, bracket })
}

#[derive(Debug, Clone, Serialize)]
pub struct Equalization {
    pub t_star: f64,
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub alpha: Field,
    pub j_pos: f64,
    pub j_neg: f64,
    pub gap: f64,
    /// `gap / (1 + |J_pos|)`
    pub relative_gap: f64,
    pub bisection_iterations: usize,
    pub bisection: Vec<BranchEnergies>,
    pub solutions: SolutionSet,
}

/// Bisection on `t` inside a bracket from [`scan_segment`], followed by a
/// full multistart at the equalized parameter.
pub fn bisect_bracket(
    base: &ProblemConfig,
    family: &AlphaFamily,
    segment: &Segment,
    scan: &BracketScan,
    starts: &Starts,
    solver: &SolverOptions,
    opts: &EqualizeOptions,
) -> Result<Equalization> {
    let Some((i, j)) = scan.bracket else {
        return Err(Error::SearchFailure(format!(
            "no sign change of J_pos - J_neg on t in [{}, {}] ({} grid points); bracket invalid",
            segment.lo, segment.hi, opts.grid_points
        )));
    };
    let mut lo = scan.table[i].clone();
    let mut hi = scan.table[j].clone();
    let mut bisection = Vec::new();
    let mut best = lo.clone();
    let mut iterations = 0;
    while !within_tol(&best, opts.tol_gap) && iterations < opts.max_bisect {
        iterations += 1;
        let t = 0.5 * (lo.t + hi.t);
        let mid = probe_branches(&cfg_at(base, family, segment, t)?, t, starts, solver);
        let Some(gap) = mid.gap() else {
            return Err(Error::SearchFailure(format!("both branches lost at t = {t}")));
        };
        bisection.push(mid.clone());
        if gap.signum() == lo.gap().unwrap_or(f64::NAN).signum() {
            lo = mid.clone();
        } else {
            hi = mid.clone();
        }
        best = mid;
    }
    if !within_tol(&best, opts.tol_gap) {
        return Err(Error::SearchFailure(format!(
            "bisection stopped after {iterations} steps at t = {} with J_pos - J_neg = {:?}",
            best.t,
            best.gap()
        )));
    }
    let (j_pos, j_neg) = (best.j_pos.unwrap_or(f64::NAN), best.j_neg.unwrap_or(f64::NAN));
    let coefficients = segment.coefficients(best.t);
    let cfg = cfg_at(base, family, segment, best.t)?;
    let solutions = multistart_with(&cfg, solver, Equation::Main, &starts.list)?;
    if solutions.len() < 3 {
        return Err(Error::SearchFailure(format!(
            "only {} distinct solution(s) at the equalized t = {}",
            solutions.len(),
            best.t
        )));
    }
    let gap = (j_pos - j_neg).abs();
    Ok(Equalization {
        t_star: best.t,
        coefficients,
        alpha: cfg.alpha,
        j_pos,
        j_neg,
        gap,
        relative_gap: gap / (1.0 + j_pos.abs()),
        bisection_iterations: iterations,
        bisection,
        solutions,
    })
}

/// Scan, bisect and verify: the parameter on `segment` where the two branch
/// energies agree, with the solutions found there.
pub fn equalize_alpha(
    base: &ProblemConfig,
    family: &AlphaFamily,
    segment: &Segment,
    starts: &Starts,
    solver: &SolverOptions,
    opts: &EqualizeOptions,
) -> Result<Equalization> {
    let scan = scan_segment(base, family, segment, starts, solver, opts)?;
    bisect_bracket(base, family, segment, &scan, starts, solver, opts)
}
