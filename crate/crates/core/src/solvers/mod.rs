//! Damped Newton with deflation and multistart for finding several distinct
//! discrete solutions, plus the local-minimality test used to identify the
//! lowest-energy pair.

mod deflation;
mod hessian;
mod multistart;
mod newton;

pub use deflation::{deflated_residual, Deflation};
pub use hessian::{hessian_flag, minima_pair, HessianFlag, MinimaPair};
pub use multistart::{
    multistart_find, multistart_with, Origin, MODE_MULTIPLES, Solution, SolutionSet, Start, StartFailure, Starts,
};
pub use newton::{
    deflated_newton_solve, newton_solve, FnSystem, NewtonResult, NewtonSystem, ProblemSystem,
};

use serde::Serialize;

use crate::discretization::Mesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Bound on the L² norm of the residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    pub deflation_power: f64,
    pub deflation_shift: f64,
    /// L² distance below which two solutions count as the same; `None`
    /// means `1e-3 * sqrt(|Ω|)`.
    pub distinct_tol: Option<f64>,
    pub max_starts: usize,
    /// Cap on the number of deflation rounds in [`multistart_find`].
    pub max_rounds: usize,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-9,
            max_newton: 50,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_halvings: 30,
            deflation_power: 2.0,
            deflation_shift: 1.0,
            distinct_tol: None,
            max_starts: 24,
            max_rounds: 4,
            rng_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::ConfigValue {
                key: format!("solver.{key}"),
                message,
            })
        };
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol", format!("must be > 0, got {}", self.newton_tol));
        }
        if self.max_newton == 0 {
            return bad("max_newton", "must be >= 1".into());
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c", format!("must lie in (0, 1), got {}", self.armijo_c));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack", format!("must lie in (0, 1), got {}", self.backtrack));
        }
        if !(self.deflation_power > 0.0) {
            return bad(
                "deflation_power",
                format!("must be > 0, got {}", self.deflation_power),
            );
        }
        if !(self.deflation_shift >= 0.0 && self.deflation_shift.is_finite()) {
            return bad(
                "deflation_shift",
                format!("must be >= 0, got {}", self.deflation_shift),
            );
        }
        if let Some(d) = self.distinct_tol {
            if !(d > 0.0) {
                return bad("distinct_tol", format!("must be > 0, got {d}"));
            }
        }
        if self.max_starts == 0 {
            return bad("max_starts", "must be >= 1".into());
        }
        if self.max_rounds == 0 {
            return bad("max_rounds", "must be >= 1".into());
        }
        Ok(())
    }

    pub fn distinct_tol_for(&self, mesh: &Mesh) -> f64 {
        self.distinct_tol.unwrap_or(1e-3 * mesh.measure().sqrt())
    }
}
