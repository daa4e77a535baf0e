use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::solvers::SolverOptions;

/// Shifted deflation `μ(u) = ∏ⱼ (‖u - uⱼ‖_M^{-p} + shift)`.
#[derive(Debug, Clone, Copy)]
pub struct Deflation<'a> {
    roots: &'a [Vec<f64>],
    mass: &'a [f64],
    power: f64,
    shift: f64,
}

impl<'a> Deflation<'a> {
    pub fn new(roots: &'a [Vec<f64>], mass: &'a [f64], power: f64, shift: f64) -> Self {
        Self {
            roots,
            mass,
            power,
            shift,
        }
    }

    pub fn from_options(roots: &'a [Vec<f64>], disc: &'a Discretization, opts: &SolverOptions) -> Self {
        Self::new(roots, disc.mass_diag(), opts.deflation_power, opts.deflation_shift)
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    fn distance(&self, u: &[f64], root: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(u)
            .zip(root)
            .map(|((m, a), b)| m * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn factor(&self, u: &[f64]) -> Result<f64> {
        let mut mu = 1.0;
        for (j, root) in self.roots.iter().enumerate() {
            let d = self.distance(u, root);
            if d == 0.0 {
                return Err(Error::DeflationDomain(j));
            }
            mu *= d.powf(-self.power) + self.shift;
        }
        Ok(mu)
    }

    /// `μ(u)` and its gradient `∇μ(u)`.
    pub fn factor_and_gradient(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mu = self.factor(u)?;
        let mut grad = vec![0.0; u.len()];
        for root in self.roots {
            let d = self.distance(u, root);
            let term = d.powf(-self.power);
            // ∂ log(d^{-p} + s) = -p d^{-p-2} M (u - uⱼ) / (d^{-p} + s)
            let coef = -self.power * term / (d * d) / (term + self.shift);
            for (((g, m), a), b) in grad.iter_mut().zip(self.mass).zip(u).zip(root) {
                *g += coef * m * (a - b);
            }
        }
        grad.iter_mut().for_each(|g| *g *= mu);
        Ok((mu, grad))
    }
}

/// Wraps `residual` as `u ↦ μ(u) r(u)` for the given roots.
pub fn deflated_residual<'a, R>(
    residual: R,
    roots: &'a [Vec<f64>],
    disc: &'a Discretization,
    opts: &SolverOptions,
) -> impl Fn(&[f64]) -> Result<Vec<f64>> + 'a
where
    R: Fn(&[f64]) -> Vec<f64> + 'a,
{
    let deflation = Deflation::from_options(roots, disc, opts);
    move |u| {
        let mu = deflation.factor(u)?;
        Ok(residual(u).into_iter().map(|r| mu * r).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_mesh;

    fn disc() -> Discretization {
        Discretization::new(build_mesh(1, 4, &[1.0]).unwrap())
    }

    fn r(u: &[f64]) -> Vec<f64> {
        u.iter().map(|x| x * x - 1.0).collect()
    }

    #[test]
    fn unit_distance_doubles_residual() {
        let disc = disc();
        // ‖(2,0,0)‖_M = 2 * sqrt(h) = 1 with h = 1/4
        let roots = vec![vec![0.0; 3]];
        let u = [2.0, 0.0, 0.0];
        let f = deflated_residual(r, &roots, &disc, &SolverOptions::default());
        assert_eq!(f(&u).unwrap(), r(&u).iter().map(|x| 2.0 * x).collect::<Vec<_>>());
    }

    #[test]
    fn no_roots_is_identity() {
        let disc = disc();
        let f = deflated_residual(r, &[], &disc, &SolverOptions::default());
        let u = [0.3, -1.2, 4.0];
        assert_eq!(f(&u).unwrap(), r(&u));
    }

    #[test]
    fn far_field_tends_to_shift() {
        let disc = disc();
        let roots = vec![vec![0.1, 0.2, 0.3]];
        let d = Deflation::from_options(&roots, &disc, &SolverOptions::default());
        let mut prev = f64::INFINITY;
        for scale in [1e1, 1e3, 1e6] {
            let mu = d.factor(&[scale, scale, scale]).unwrap();
            assert!(mu > 1.0 && mu < prev);
            prev = mu;
        }
        assert!((prev - 1.0).abs() < 1e-10);
    }

    #[test]
    fn factor_exceeds_shift() {
        let disc = disc();
        let roots = vec![vec![0.0; 3], vec![1.0; 3]];
        let d = Deflation::new(&roots, disc.mass_diag(), 2.0, 0.5);
        for u in [[0.2, 0.1, -3.0], [9.0, 9.0, 9.0], [1.0, 1.0, 1.01]] {
            assert!(d.factor(&u).unwrap() > 0.25);
        }
    }

    #[test]
    fn evaluating_at_root_is_domain_error() {
        let disc = disc();
        let roots = vec![vec![1.0; 3], vec![0.5; 3]];
        let f = deflated_residual(r, &roots, &disc, &SolverOptions::default());
        assert!(matches!(f(&[0.5; 3]), Err(Error::DeflationDomain(1))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let disc = disc();
        let roots = vec![vec![0.3, -0.2, 0.1], vec![1.0, 0.5, 0.0]];
        let d = Deflation::new(&roots, disc.mass_diag(), 2.0, 1.0);
        let u = [0.7, 0.1, -0.4];
        let (mu, g) = d.factor_and_gradient(&u).unwrap();
        assert_eq!(mu, d.factor(&u).unwrap());
        for i in 0..3 {
            let eps = 1e-6;
            let mut up = u;
            let mut um = u;
            up[i] += eps;
            um[i] -= eps;
            let fd = (d.factor(&up).unwrap() - d.factor(&um).unwrap()) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "{i}: {fd} vs {}", g[i]);
        }
    }
}
