use serde::Serialize;

use crate::discretization::BandedLu;
use crate::energy::{Equation, ProblemConfig};
use crate::error::{Error, Result};
use crate::solvers::SolutionSet;

const MAX_ITERATIONS: usize = 2000;
const TOL: f64 = 1e-12;
/// Relative bound on negative curvature still accepted as a minimum.
const MINIMUM_TOL: f64 = 1e-8;

/// Smallest eigenvalue of the energy Hessian at a solution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HessianFlag {
    /// Smallest `μ` with `H v = μ M v`. Its sign is the sign of the smallest
    /// eigenvalue of `H` itself.
    pub min_eigenvalue: f64,
    /// `-1e-8 ‖M⁻¹A‖_∞`
    pub threshold: f64,
    pub local_minimum: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Shifted inverse iteration for the smallest eigenvalue of `(H, M)`, where
/// `H = A + diag(d)` is the Hessian of the chosen energy at `u`.
///
/// The shift `σ = min(dᵢ/mᵢ) - 1` makes `H - σM` positive definite, so the
/// iteration converges to the bottom of the spectrum regardless of sign.
pub fn hessian_flag(cfg: &ProblemConfig, equation: Equation, u: &[f64]) -> Result<HessianFlag> {
    cfg.disc.check_len(u)?;
    let m = cfg.disc.mass_diag();
    let d = cfg.jacobian_shift(equation, u);
    let sigma = d
        .iter()
        .zip(m)
        .map(|(d, m)| d / m)
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    let shifted: Vec<f64> = d.iter().zip(m).map(|(d, m)| d - sigma * m).collect();
    let lu = BandedLu::factor(&cfg.disc.stiffness_csr().with_diagonal_shift(&shifted))?;
    let hess = cfg.jacobian(equation, u);

    let norm_est = cfg
        .disc
        .stiffness_csr()
        .norm_inf()
        / m.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = -MINIMUM_TOL * norm_est;

    let m_norm = |v: &[f64]| {
        v.iter()
            .zip(m)
            .map(|(v, m)| m * v * v)
            .sum::<f64>()
            .sqrt()
    };
    let mut v = vec![1.0; u.len()];
    let n0 = m_norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut rq = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let mv: Vec<f64> = v.iter().zip(m).map(|(v, m)| v * m).collect();
        let w = lu.solve(&mv);
        let wn = m_norm(&w);
        if !(wn > 0.0 && wn.is_finite()) {
            return Err(Error::EigenNotConverged {
                iterations: it,
                estimate: rq,
                residual: f64::NAN,
            });
        }
        v = w.into_iter().map(|x| x / wn).collect();
        let hv = hess.mul_vec(&v);
        let rq_new: f64 = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
        if (rq_new - rq).abs() <= TOL * rq_new.abs().max(1.0) {
            return Ok(HessianFlag {
                min_eigenvalue: rq_new,
                threshold,
                local_minimum: rq_new >= threshold,
                iterations: it,
                converged: true,
            });
        }
        rq = rq_new;
    }
    Ok(HessianFlag {
        min_eigenvalue: rq,
        threshold,
        local_minimum: rq >= threshold,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// The two lowest-energy members of a solution set.
#[derive(Debug, Clone, Serialize)]
pub struct MinimaPair {
    /// Indices into the (energy-sorted) solution set.
    pub indices: [usize; 2],
    pub energies: [f64; 2],
    pub gap: f64,
    /// `gap / (1 + |J_a|)`
    pub relative_gap: f64,
    pub flags: [HessianFlag; 2],
    pub both_minima: bool,
}

pub fn minima_pair(set: &SolutionSet, cfg: &ProblemConfig) -> Result<MinimaPair> {
    if set.members.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "minima pair needs at least 2 solutions, found {}",
            set.members.len()
        )));
    }
    let mut order: Vec<usize> = (0..set.members.len()).collect();
    order.sort_by(|&a, &b| set.members[a].energy.total_cmp(&set.members[b].energy));
    let (a, b) = (order[0], order[1]);
    let (ja, jb) = (set.members[a].energy, set.members[b].energy);
    let flags = [
        hessian_flag(cfg, set.equation, &set.members[a].u)?,
        hessian_flag(cfg, set.equation, &set.members[b].u)?,
    ];
    let gap = (ja - jb).abs();
    Ok(MinimaPair {
        indices: [a, b],
        energies: [ja, jb],
        gap,
        relative_gap: gap / (1.0 + ja.abs()),
        both_minima: flags[0].local_minimum && flags[1].local_minimum,
        flags,
    })
}
