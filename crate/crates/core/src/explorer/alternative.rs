use serde::Serialize;

use crate::energy::{Equation, ProblemConfig};
use crate::error::Result;
use crate::solvers::{multistart_with, SolutionSet, SolverOptions, Start};

/// Relative L² size above which an auxiliary solution counts as nonzero.
pub const NONTRIVIAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct AlternativeResult {
    pub nontrivial_found: bool,
    /// `1e-6 * sqrt(|Ω|)`
    pub threshold: f64,
    /// Index into `solutions.members` of the largest nonzero solution.
    pub witness: Option<usize>,
    pub max_l2_norm: f64,
    pub solutions: SolutionSet,
}

impl AlternativeResult {
    pub fn witness_field(&self) -> Option<&[f64]> {
        self.witness.map(|i| self.solutions.members[i].u.as_slice())
    }
}

/// Multistart on `-Δu = -F(u) f(u) + λ g(u)`, looking for a nonzero solution.
pub fn check_alternative(cfg: &ProblemConfig, opts: &SolverOptions, starts: &[Start]) -> Result<AlternativeResult> {
    let solutions = multistart_with(cfg, opts, Equation::Auxiliary, starts)?;
    let threshold = NONTRIVIAL_TOL * cfg.disc.mesh.measure().sqrt();
    let (witness, max_l2_norm) = solutions
        .members
        .iter()
        .enumerate()
        .fold((None, 0.0f64), |(w, best), (i, s)| {
            if s.l2_norm > best {
                (Some(i), s.l2_norm)
            } else {
                (w, best)
            }
        });
    let nontrivial_found = max_l2_norm > threshold;
    Ok(AlternativeResult {
        nontrivial_found,
        threshold,
        witness: witness.filter(|_| nontrivial_found),
        max_l2_norm,
        solutions,
    })
}
