use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{smallest_eigenpair, Discretization, Eigenpair};
use crate::energy::{Equation, ProblemConfig};
use crate::error::{Error, Result};
use crate::solvers::{deflated_newton_solve, ProblemSystem, SolverOptions};

/// Multiples of `v₁` used as deterministic starts, on both sides.
pub const MODE_MULTIPLES: [f64; 3] = [0.1, 1.0, 5.0];
const RANDOM_AMPLITUDE: (f64, f64) = (0.1, 5.0);
const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Start {
    pub label: String,
    pub u: Vec<f64>,
}

/// Starting fields for multistart: `0`, `±t v₁` and random smooth fields.
#[derive(Debug, Clone)]
pub struct Starts {
    pub lambda1: f64,
    /// `‖v₁‖_M = 1`, positive.
    pub v1: Vec<f64>,
    pub list: Vec<Start>,
}

impl Starts {
    pub fn compute(disc: &Discretization, opts: &SolverOptions) -> Result<Self> {
        let ep = smallest_eigenpair(&disc.stiffness, &disc.mass, EIGEN_TOL)?;
        Ok(Self::from_eigenpair(disc, &ep, opts))
    }

    /// Builds `max_starts` fields: `0`, then `+t v₁`, `-t v₁` for each
    /// multiple, then random fields `A⁻¹Mz` with Gaussian `z`, rescaled to an
    /// L² norm drawn uniformly from `[0.1, 5]`.
    pub fn from_eigenpair(disc: &Discretization, ep: &Eigenpair, opts: &SolverOptions) -> Self {
        let mut list = vec![Start {
            label: "zero".into(),
            u: vec![0.0; disc.n()],
        }];
        for t in MODE_MULTIPLES {
            for sign in [1.0, -1.0] {
                list.push(Start {
                    label: format!("{}{t}v1", if sign > 0.0 { "+" } else { "-" }),
                    u: ep.vector.iter().map(|v| sign * t * v).collect(),
                });
            }
        }
        list.truncate(opts.max_starts);

        let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
        let m = disc.mass_diag();
        let mut k = 0;
        while list.len() < opts.max_starts {
            let z: Vec<f64> = m.iter().map(|m| m * rng.sample::<f64, _>(StandardNormal)).collect();
            let w = disc.solve_stiffness(&z);
            let amp = rng.random_range(RANDOM_AMPLITUDE.0..RANDOM_AMPLITUDE.1);
            let norm = disc.l2_norm(&w);
            if norm > 0.0 {
                list.push(Start {
                    label: format!("random{k}"),
                    u: w.into_iter().map(|x| x * amp / norm).collect(),
                });
            }
            k += 1;
        }
        Self {
            lambda1: ep.lambda,
            v1: ep.vector.clone(),
            list,
        }
    }

    /// The `±t v₁` starts on one side.
    pub fn mode_side(&self, positive: bool) -> Vec<Start> {
        let sign = if positive { 1.0 } else { -1.0 };
        MODE_MULTIPLES
            .iter()
            .map(|t| Start {
                label: format!("{}{t}v1", if positive { "+" } else { "-" }),
                u: self.v1.iter().map(|v| sign * t * v).collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Origin {
    pub start: usize,
    pub round: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    #[serde(skip)]
    pub u: Vec<f64>,
    pub energy: f64,
    pub residual_norm: f64,
    pub l2_norm: f64,
    pub origin: Origin,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StartFailure {
    pub start: usize,
    pub round: usize,
    pub reason: String,
}

/// Distinct solutions sorted by energy.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSet {
    pub equation: Equation,
    pub members: Vec<Solution>,
    pub failures: Vec<StartFailure>,
    pub starts: usize,
    pub rounds: usize,
    /// Converged runs that landed within the distinctness tolerance of a
    /// root deflated in the same round.
    pub rediscovered: usize,
    pub distinct_tol: f64,
}

impl SolutionSet {
    pub fn empty(equation: Equation) -> Self {
        Self {
            equation,
            members: Vec::new(),
            failures: Vec::new(),
            starts: 0,
            rounds: 0,
            rediscovered: 0,
            distinct_tol: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// [`multistart_with`] using freshly computed starts.
pub fn multistart_find(cfg: &ProblemConfig, opts: &SolverOptions, equation: Equation) -> Result<SolutionSet> {
    let starts = Starts::compute(&cfg.disc, opts)?;
    multistart_with(cfg, opts, equation, &starts.list)
}

/// Runs deflated Newton from every start in rounds.
///
/// Round `k` deflates every root known when the round begins; runs within a
/// round are independent and execute in parallel. Results merge in start
/// order, keeping solutions farther than the distinctness tolerance from
/// every known one. Stops after a round without new solutions or after
/// `max_rounds`.
pub fn multistart_with(
    cfg: &ProblemConfig,
    opts: &SolverOptions,
    equation: Equation,
    starts: &[Start],
) -> Result<SolutionSet> {
    opts.validate()?;
    let sys = ProblemSystem::new(cfg, equation);
    let disc = &cfg.disc;
    let delta = opts.distinct_tol_for(&disc.mesh);
    let mut set = SolutionSet {
        starts: starts.len(),
        distinct_tol: delta,
        ..SolutionSet::empty(equation)
    };
    let mut roots: Vec<Vec<f64>> = Vec::new();

    for round in 0..opts.max_rounds {
        set.rounds = round + 1;
        let deflated = roots.clone();
        let results: Vec<_> = starts
            .par_iter()
            .map(|s| deflated_newton_solve(&sys, &deflated, &s.u, opts))
            .collect();
        let mut added = 0;
        for (i, result) in results.into_iter().enumerate() {
            match result {
                Ok(res) => {
                    let near = |r: &Vec<f64>| {
                        let diff: Vec<f64> = r.iter().zip(&res.u).map(|(a, b)| a - b).collect();
                        disc.l2_norm(&diff) <= delta
                    };
                    if deflated.iter().any(near) {
                        set.rediscovered += 1;
                    } else if !roots.iter().any(near) {
                        set.members.push(Solution {
                            energy: cfg.energy_of(equation, &res.u),
                            residual_norm: res.residual_norm,
                            l2_norm: disc.l2_norm(&res.u),
                            origin: Origin { start: i, round },
                            iterations: res.iterations,
                            u: res.u.clone(),
                        });
                        roots.push(res.u);
                        added += 1;
                    }
                }
                Err(e) => set.failures.push(StartFailure {
                    start: i,
                    round,
                    reason: failure_reason(&e),
                }),
            }
        }
        if added == 0 {
            break;
        }
    }
    set.members.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.origin.round.cmp(&b.origin.round))
            .then(a.origin.start.cmp(&b.origin.start))
    });
    Ok(set)
}

fn failure_reason(e: &Error) -> String {
    match e {
        Error::DeflationDomain(_) => "start coincides with a known root".into(),
        Error::NewtonFailed { reason, .. } => reason.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::discretization::{build_mesh, Field};
    use crate::nonlinearity::Nonlinearity;

    fn cfg(n: usize, f: Nonlinearity, lambda: f64, alpha: f64) -> ProblemConfig {
        let disc = Arc::new(Discretization::new(build_mesh(1, n, &[1.0]).unwrap()));
        let alpha = Field::constant(&disc.mesh, alpha);
        ProblemConfig::new(disc, f, Nonlinearity::plus_power(3.0).unwrap(), lambda, alpha).unwrap()
    }

    #[test]
    fn start_list_layout() {
        let disc = Discretization::new(build_mesh(1, 40, &[1.0]).unwrap());
        let opts = SolverOptions::default();
        let s = Starts::compute(&disc, &opts).unwrap();
        assert_eq!(s.list.len(), 24);
        assert_eq!(s.list[0].label, "zero");
        assert_eq!(s.list[1].label, "+0.1v1");
        assert_eq!(s.list[6].label, "-5v1");
        assert!((disc.l2_norm(&s.list[3].u) - 1.0).abs() < 1e-12);
        for st in &s.list[7..] {
            let norm = disc.l2_norm(&st.u);
            assert!((0.1..=5.0).contains(&norm));
        }
        let again = Starts::compute(&disc, &opts).unwrap();
        assert!(s.list.iter().zip(&again.list).all(|(a, b)| a.u == b.u));
        let other = Starts::compute(&disc, &SolverOptions { rng_seed: 9, ..opts }).unwrap();
        assert_ne!(s.list[10].u, other.list[10].u);
    }

    #[test]
    fn linear_problem_has_one_solution() {
        let cfg = cfg(40, Nonlinearity::constant_one(), 0.0, 0.7);
        let set = multistart_find(&cfg, &SolverOptions::default(), Equation::Main).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.members[0].residual_norm <= 1e-9);
    }

    #[test]
    fn logistic_problem_has_three_solutions() {
        // -u'' = λ(u⁺ - (u⁺)³), λ = 2λ₁: zero, the positive branch, and nothing on the negative side
        let cfg = cfg(60, Nonlinearity::constant(0.0).unwrap(), 2.0 * 9.87, 0.0);
        let opts = SolverOptions::default();
        let set = multistart_find(&cfg, &opts, Equation::Main).unwrap();
        assert_eq!(set.len(), 2, "{:?}", set.members);
        assert!(set.members[0].energy < 0.0);
        assert_eq!(set.members[1].energy, 0.0);
        for s in &set.members {
            assert!(cfg.residual_norm(&cfg.residual(&s.u)) <= opts.newton_tol);
        }
    }

    #[test]
    fn members_are_distinct_and_deterministic() {
        let lambda: f64 = 2.0 * 9.87;
        let cfg = cfg(60, Nonlinearity::constant(lambda.sqrt()).unwrap(), lambda, -0.35);
        let opts = SolverOptions::default();
        let a = multistart_find(&cfg, &opts, Equation::Main).unwrap();
        let b = multistart_find(&cfg, &opts, Equation::Main).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.members.iter().zip(&b.members) {
            assert_eq!(x.u, y.u);
            assert_eq!(x.origin, y.origin);
        }
        for (i, x) in a.members.iter().enumerate() {
            for y in &a.members[i + 1..] {
                let diff: Vec<f64> = x.u.iter().zip(&y.u).map(|(p, q)| p - q).collect();
                assert!(cfg.disc.l2_norm(&diff) > a.distinct_tol);
            }
        }
        assert!(a.members.windows(2).all(|w| w[0].energy <= w[1].energy));
    }

    #[test]
    fn auxiliary_has_only_zero_for_reference_config() {
        let lambda: f64 = 2.0 * 9.87;
        let cfg = cfg(60, Nonlinearity::constant(lambda.sqrt()).unwrap(), lambda, 0.0);
        let set = multistart_find(&cfg, &SolverOptions::default(), Equation::Auxiliary).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.members[0].l2_norm <= 1e-8);
    }
}
