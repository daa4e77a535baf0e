use serde::Serialize;

use crate::discretization::vector::{dot, step};
use crate::discretization::{BandedLu, CsrMatrix, Discretization};
use crate::energy::{Equation, ProblemConfig};
use crate::error::{Error, Result};
use crate::solvers::{Deflation, SolverOptions};

/// A nonlinear system `r(u) = 0` posed on a mesh.
pub trait NewtonSystem: Sync {
    fn disc(&self) -> &Discretization;
    fn residual(&self, u: &[f64]) -> Vec<f64>;
    fn jacobian(&self, u: &[f64]) -> CsrMatrix;
    /// Energy whose gradient is `residual`, if there is one.
    fn energy(&self, _u: &[f64]) -> Option<f64> {
        None
    }
}

/// `r(u) = 0` for the main or auxiliary equation of a [`ProblemConfig`].
#[derive(Debug, Clone, Copy)]
pub struct ProblemSystem<'a> {
    pub cfg: &'a ProblemConfig,
    pub equation: Equation,
}

impl<'a> ProblemSystem<'a> {
    pub fn new(cfg: &'a ProblemConfig, equation: Equation) -> Self {
        Self { cfg, equation }
    }
}

impl NewtonSystem for ProblemSystem<'_> {
    fn disc(&self) -> &Discretization {
        &self.cfg.disc
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        self.cfg.residual_of(self.equation, u)
    }

    fn jacobian(&self, u: &[f64]) -> CsrMatrix {
        self.cfg.jacobian(self.equation, u)
    }

    fn energy(&self, u: &[f64]) -> Option<f64> {
        Some(self.cfg.energy_of(self.equation, u))
    }
}

/// A system given by a residual closure and a Jacobian closure.
pub struct FnSystem<'a, R, J> {
    pub disc: &'a Discretization,
    pub residual: R,
    pub jacobian: J,
}

impl<R, J> NewtonSystem for FnSystem<'_, R, J>
where
    R: Fn(&[f64]) -> Vec<f64> + Sync,
    J: Fn(&[f64]) -> CsrMatrix + Sync,
{
    fn disc(&self) -> &Discretization {
        self.disc
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        (self.residual)(u)
    }

    fn jacobian(&self, u: &[f64]) -> CsrMatrix {
        (self.jacobian)(u)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonResult {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// L² norm of the undeflated residual at `u`.
    pub residual_norm: f64,
    /// Steps taken along the energy gradient instead of the Newton direction.
    pub fallback_steps: usize,
}

struct Eval {
    /// Undeflated residual.
    base: Vec<f64>,
    base_norm: f64,
    /// `½ ‖μ r‖²_{L²}`
    merit: f64,
}

fn evaluate<S: NewtonSystem + ?Sized>(sys: &S, deflation: &Deflation, u: &[f64]) -> Result<Eval> {
    let mu = deflation.factor(u)?;
    let base = sys.residual(u);
    let base_norm = sys.disc().dual_l2_norm(&base);
    let merit = 0.5 * (mu * base_norm).powi(2);
    if !merit.is_finite() {
        return Err(Error::InvalidArgument("residual is not finite".into()));
    }
    Ok(Eval {
        base,
        base_norm,
        merit,
    })
}

/// Newton direction for `μ r`, via Sherman–Morrison on `μJ + r ∇μᵀ`.
fn newton_direction<S: NewtonSystem + ?Sized>(
    sys: &S,
    deflation: &Deflation,
    u: &[f64],
    eval: &Eval,
) -> Result<Vec<f64>> {
    let lu = BandedLu::factor(&sys.jacobian(u))?;
    let neg: Vec<f64> = eval.base.iter().map(|r| -r).collect();
    let d0 = lu.solve(&neg);
    if d0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular(0));
    }
    if deflation.is_empty() {
        return Ok(d0);
    }
    let (mu, grad) = deflation.factor_and_gradient(u)?;
    let denom = 1.0 - dot(&grad, &d0) / mu;
    if !denom.is_finite() || denom.abs() < 1e-12 {
        return Ok(d0);
    }
    Ok(d0.into_iter().map(|x| x / denom).collect())
}

fn failed(reason: &str, iterations: usize, eval: Option<&Eval>, u: Vec<f64>) -> Error {
    Error::NewtonFailed {
        reason: reason.to_string(),
        iterations,
        residual: eval.map_or(f64::NAN, |e| e.base_norm),
        last: u,
    }
}

/// Damped Newton for `r(u) = 0` from `u0`.
pub fn newton_solve<S: NewtonSystem + ?Sized>(
    sys: &S,
    u0: &[f64],
    opts: &SolverOptions,
) -> Result<NewtonResult> {
    deflated_newton_solve(sys, &[], u0, opts)
}

/// Damped Newton on the deflated residual `μ(u) r(u)`, which vanishes only
/// at roots of `r` other than `roots`.
///
/// Steps follow the Newton direction with Armijo backtracking on
/// `½‖μ r‖²_{L²}`. If no acceptable Newton step exists, one step along the
/// H¹ energy gradient `-A⁻¹ r` is taken instead, backtracking on the energy
/// when the system has one. Convergence is judged on the undeflated residual.
pub fn deflated_newton_solve<S: NewtonSystem + ?Sized>(
    sys: &S,
    roots: &[Vec<f64>],
    u0: &[f64],
    opts: &SolverOptions,
) -> Result<NewtonResult> {
    let disc = sys.disc();
    disc.check_len(u0)?;
    let deflation = Deflation::from_options(roots, disc, opts);
    let mut u = u0.to_vec();
    let mut eval = match evaluate(sys, &deflation, &u) {
        Ok(e) => e,
        Err(Error::DeflationDomain(j)) => return Err(Error::DeflationDomain(j)),
        Err(_) => return Err(failed("residual not finite at start", 0, None, u)),
    };
    let mut fallback_steps = 0;

    for it in 0..=opts.max_newton {
        if eval.base_norm <= opts.newton_tol {
            return Ok(NewtonResult {
                u,
                iterations: it,
                residual_norm: eval.base_norm,
                fallback_steps,
            });
        }
        if it == opts.max_newton {
            break;
        }

        let accepted = newton_direction(sys, &deflation, &u, &eval)
            .ok()
            .and_then(|d| armijo_on_merit(sys, &deflation, &u, &d, &eval, opts));
        let next = match accepted {
            Some(next) => Some(next),
            None => {
                fallback_steps += 1;
                energy_descent_step(sys, &deflation, &u, &eval, opts)
            }
        };
        match next {
            Some((v, e)) => {
                u = v;
                eval = e;
            }
            None => return Err(failed("line search failed", it, Some(&eval), u)),
        }
    }
    Err(failed("iteration limit reached", opts.max_newton, Some(&eval), u))
}

fn armijo_on_merit<S: NewtonSystem + ?Sized>(
    sys: &S,
    deflation: &Deflation,
    u: &[f64],
    d: &[f64],
    eval: &Eval,
    opts: &SolverOptions,
) -> Option<(Vec<f64>, Eval)> {
    // along an exact Newton direction the merit has slope -2 * merit
    let slope = -2.0 * eval.merit;
    let mut s = 1.0;
    for _ in 0..=opts.max_halvings {
        let trial = step(u, s, d);
        if let Ok(e) = evaluate(sys, deflation, &trial) {
            if e.merit <= eval.merit + opts.armijo_c * s * slope {
                return Some((trial, e));
            }
        }
        s *= opts.backtrack;
    }
    None
}

fn energy_descent_step<S: NewtonSystem + ?Sized>(
    sys: &S,
    deflation: &Deflation,
    u: &[f64],
    eval: &Eval,
    opts: &SolverOptions,
) -> Option<(Vec<f64>, Eval)> {
    let mut d = sys.disc().solve_stiffness(&eval.base);
    d.iter_mut().for_each(|x| *x = -*x);
    let slope = dot(&eval.base, &d);
    if !(slope < 0.0) {
        return None;
    }
    let e0 = sys.energy(u);
    let mut s = 1.0;
    for _ in 0..=opts.max_halvings {
        let trial = step(u, s, &d);
        if let Ok(e) = evaluate(sys, deflation, &trial) {
            let ok = match (e0, sys.energy(&trial)) {
                (Some(j0), Some(j)) => j <= j0 + opts.armijo_c * s * slope,
                _ => e.merit < eval.merit,
            };
            if ok {
                return Some((trial, e));
            }
        }
        s *= opts.backtrack;
    }
    None
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::discretization::{build_mesh, cg_solve, Field};
    use crate::nonlinearity::Nonlinearity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize, f: Nonlinearity, lambda: f64, alpha: f64) -> ProblemConfig {
        let disc = Arc::new(Discretization::new(build_mesh(1, n, &[1.0]).unwrap()));
        let alpha = Field::constant(&disc.mesh, alpha);
        ProblemConfig::new(disc, f, Nonlinearity::plus_power(3.0).unwrap(), lambda, alpha).unwrap()
    }

    #[test]
    fn linear_problem_converges_in_one_step() {
        let cfg = cfg(50, Nonlinearity::constant_one(), 0.0, 1.0);
        let sys = ProblemSystem::new(&cfg, Equation::Main);
        let res = newton_solve(&sys, &vec![0.0; 49], &SolverOptions::default()).unwrap();
        assert_eq!(res.iterations, 1);
        let b = cfg.disc.mass.apply(&[1.0; 49]);
        let oracle = cg_solve(&cfg.disc.stiffness, &b, 1e-12, 1000).unwrap().x;
        for (a, b) in res.u.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn below_first_eigenvalue_converges_to_zero() {
        // λ < λ₁ and α = 0: zero is the only critical point
        let cfg = cfg(64, Nonlinearity::constant_one(), 5.0, 0.0);
        let sys = ProblemSystem::new(&cfg, Equation::Main);
        let jac = cfg.jacobian(Equation::Main, &[0.0; 63]);
        // energy is convex near 0: the Jacobian there is positive definite
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let v: Vec<f64> = (0..63).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(dot(&v, &jac.mul_vec(&v)) > 0.0);
        }
        for _ in 0..5 {
            let u0: Vec<f64> = (0..63).map(|_| rng.random_range(-0.1..0.1)).collect();
            let res = newton_solve(&sys, &u0, &SolverOptions::default()).unwrap();
            assert!(cfg.disc.l2_norm(&res.u) < 1e-9);
        }
    }

    #[test]
    fn root_start_takes_zero_iterations() {
        let cfg = cfg(20, Nonlinearity::constant(0.0).unwrap(), 30.0, 0.0);
        let sys = ProblemSystem::new(&cfg, Equation::Main);
        let res = newton_solve(&sys, &[0.0; 19], &SolverOptions::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.residual_norm, 0.0);
    }

    #[test]
    fn accepted_steps_satisfy_armijo() {
        let cfg = cfg(40, Nonlinearity::constant(0.0).unwrap(), 2.0 * 9.87, 0.0);
        let sys = ProblemSystem::new(&cfg, Equation::Main);
        let opts = SolverOptions::default();
        let none = Deflation::from_options(&[], &cfg.disc, &opts);
        let mut u: Vec<f64> = cfg.disc.mesh.node_coords().iter().map(|c| 3.0 * (std::f64::consts::PI * c[0]).sin()).collect();
        let mut eval = evaluate(&sys, &none, &u).unwrap();
        for _ in 0..8 {
            if eval.base_norm < 1e-12 {
                break;
            }
            let d = newton_direction(&sys, &none, &u, &eval).unwrap();
            let (next, e) = armijo_on_merit(&sys, &none, &u, &d, &eval, &opts).unwrap();
            let s = (0..=opts.max_halvings)
                .map(|k| opts.backtrack.powi(k as i32))
                .find(|s| step(&u, *s, &d) == next)
                .unwrap();
            assert!(e.merit <= eval.merit - opts.armijo_c * s * 2.0 * eval.merit);
            u = next;
            eval = e;
        }
    }

    #[test]
    fn logistic_positive_solution_from_first_mode() {
        let lambda = 2.0 * 9.8696;
        let cfg = cfg(100, Nonlinearity::constant(0.0).unwrap(), lambda, 0.0);
        let sys = ProblemSystem::new(&cfg, Equation::Main);
        let u0: Vec<f64> = cfg.disc.mesh.node_coords().iter().map(|c| (std::f64::consts::PI * c[0]).sin()).collect();
        let res = newton_solve(&sys, &u0, &SolverOptions::default()).unwrap();
        assert!(res.residual_norm <= 1e-9);
        assert!(res.u.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(cfg.energy(&res.u) < 0.0);
    }

    #[test]
    fn deflation_finds_a_different_root() {
        let lambda = 2.0 * 9.8696;
        let cfg = cfg(100, Nonlinearity::constant(0.0).unwrap(), lambda, 0.0);
        let sys = ProblemSystem::new(&cfg, Equation::Main);
        let opts = SolverOptions::default();
        let u0: Vec<f64> = cfg.disc.mesh.node_coords().iter().map(|c| (std::f64::consts::PI * c[0]).sin()).collect();
        let first = newton_solve(&sys, &u0, &opts).unwrap();
        let roots = vec![first.u.clone()];
        let second = deflated_newton_solve(&sys, &roots, &u0, &opts).unwrap();
        let diff: Vec<f64> = first.u.iter().zip(&second.u).map(|(a, b)| a - b).collect();
        assert!(cfg.disc.l2_norm(&diff) > 1e-3);
        assert!(cfg.residual_norm(&cfg.residual(&second.u)) <= 1e-9);
    }

    #[test]
    fn closure_system_matches_problem_system() {
        let cfg = cfg(30, Nonlinearity::constant_one(), 12.0, -0.5);
        let fs = FnSystem {
            disc: &cfg.disc,
            residual: |u: &[f64]| cfg.residual(u),
            jacobian: |u: &[f64]| cfg.jacobian(Equation::Main, u),
        };
        let ps = ProblemSystem::new(&cfg, Equation::Main);
        let u0 = vec![-0.2; 29];
        let a = newton_solve(&fs, &u0, &SolverOptions::default()).unwrap();
        let b = newton_solve(&ps, &u0, &SolverOptions::default()).unwrap();
        assert_eq!(a.u, b.u);
    }

    #[test]
    fn iteration_limit_reports_last_iterate() {
        let lambda = 2.0 * 9.8696;
        let cfg = cfg(50, Nonlinearity::constant(0.0).unwrap(), lambda, 0.0);
        let sys = ProblemSystem::new(&cfg, Equation::Main);
        let opts = SolverOptions {
            max_newton: 1,
            ..Default::default()
        };
        let u0 = vec![5.0; 49];
        match newton_solve(&sys, &u0, &opts) {
            Err(Error::NewtonFailed { last, iterations, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last.len(), 49);
                assert_ne!(last, u0);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn start_on_deflated_root_is_domain_error() {
        let cfg = cfg(20, Nonlinearity::constant(0.0).unwrap(), 30.0, 0.0);
        let sys = ProblemSystem::new(&cfg, Equation::Main);
        let roots = vec![vec![0.0; 19]];
        assert!(matches!(
            deflated_newton_solve(&sys, &roots, &[0.0; 19], &SolverOptions::default()),
            Err(Error::DeflationDomain(0))
        ));
    }
}
