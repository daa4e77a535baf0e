use serde::Serialize;

use super::{Kind, Nonlinearity};
use crate::error::{Error, Result};
use crate::extended;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    Estimated,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RhoSigma {
    /// `limsup_{|ξ|→∞} G(ξ)/ξ²`
    #[serde(serialize_with = "extended::serialize")]
    pub rho: f64,
    /// `max` of the one-sided `liminf_{ξ→0±} G(ξ)/ξ²`
    #[serde(serialize_with = "extended::serialize")]
    pub sigma: f64,
    pub exactness: Exactness,
}

/// Logarithmically spaced points from `lo` to `hi` inclusive.
pub(crate) fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Growth rates of `G` at infinity and at zero.
///
/// Exact for built-ins. Otherwise `ρ` is the max of `G(ξ)/ξ²` over
/// `|ξ| ∈ logspace(1e2, 1e6, 200)` and `σ` the larger of the one-sided minima
/// over `ξ ∈ ±logspace(1e-8, 1e-2, 200)`, flagged as estimates.
pub fn rho_sigma(g: &Nonlinearity) -> RhoSigma {
    let s = g.scale();
    match g.kind() {
        Kind::PlusPower { .. } if s > 0.0 => {
            return RhoSigma {
                rho: 0.0,
                sigma: 0.5 * s,
                exactness: Exactness::Exact,
            }
        }
        Kind::Constant { c } => {
            return RhoSigma {
                rho: 0.0,
                sigma: if c * s == 0.0 { 0.0 } else { f64::INFINITY },
                exactness: Exactness::Exact,
            }
        }
        _ => {}
    }
    let ratio = |x: f64| g.primitive(x) / (x * x);
    let far = logspace(1e2, 1e6, 200);
    let rho = far
        .iter()
        .flat_map(|&x| [ratio(x), ratio(-x)])
        .fold(f64::NEG_INFINITY, f64::max);
    let near = logspace(1e-8, 1e-2, 200);
    let one_sided = |sign: f64| near.iter().map(|&x| ratio(sign * x)).fold(f64::INFINITY, f64::min);
    RhoSigma {
        rho,
        sigma: one_sided(1.0).max(one_sided(-1.0)),
        exactness: Exactness::Estimated,
    }
}

/// `inf_{ξ∈]0,1]} H(ξ)h(ξ)/ξ` over the uniform grid `k/10⁴`, `k = 1..=10⁴`.
///
/// Fails unless `h >= 0` on the grid of `[0, 1]` and its grid minimum is
/// positive.
pub fn gamma_corollary2(h: &Nonlinearity) -> Result<f64> {
    const N: usize = 10_000;
    let grid = (0..=N).map(|k| k as f64 / N as f64);
    let hmin = grid.clone().map(|x| h.value(x)).fold(f64::INFINITY, f64::min);
    if !(hmin > 0.0) {
        return Err(Error::Hypothesis(format!(
            "inf over [0,1] of h must be > 0 (grid minimum {hmin})"
        )));
    }
    let gamma = grid
        .skip(1)
        .map(|x| h.primitive(x) * h.value(x) / x)
        .fold(f64::INFINITY, f64::min);
    if !(gamma > 0.0) {
        return Err(Error::Hypothesis(format!("gamma = {gamma} is not positive")));
    }
    Ok(gamma)
}

/// `(λ₁/(2σ), λ₁/(2 max{ρ,0}))` with `λ₁/∞ = 0` and `λ₁/0 = ∞`.
pub fn lambda_interval(rho: f64, sigma: f64, lambda1: f64) -> Result<(f64, f64)> {
    let rho_plus = rho.max(0.0);
    if !(rho_plus < sigma) {
        return Err(Error::Hypothesis(format!(
            "need max(rho, 0) < sigma, got rho = {rho}, sigma = {sigma}"
        )));
    }
    let lo = if sigma.is_infinite() {
        0.0
    } else {
        lambda1 / (2.0 * sigma)
    };
    let hi = if rho_plus == 0.0 {
        f64::INFINITY
    } else {
        lambda1 / (2.0 * rho_plus)
    };
    Ok((lo, hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    #[serde(serialize_with = "extended::serialize")]
    pub rho: f64,
    #[serde(serialize_with = "extended::serialize")]
    pub sigma: f64,
    #[serde(serialize_with = "extended::serialize_opt")]
    pub gamma: Option<f64>,
    pub lambda1: f64,
    #[serde(serialize_with = "extended::serialize")]
    pub lambda_lo: f64,
    #[serde(serialize_with = "extended::serialize")]
    pub lambda_hi: f64,
    pub rho_sigma_exactness: Exactness,
    pub gamma_exactness: Option<Exactness>,
    pub lambda1_exactness: Exactness,
    /// Growth exponents `p` of `f` and `q` of `g`, as metadata.
    pub p: f64,
    pub q: f64,
    /// Largest `|F(ξ)|/ξ²` over `|ξ| ∈ logspace(1e4, 1e6, 50)`.
    pub f_primitive_quadratic_ratio: f64,
    /// Largest `|F(ξ)|/ξ²` at `|ξ| = 1e6`.
    pub f_primitive_quadratic_ratio_far: f64,
    /// Grid-level check of `|F(ξ)|/ξ² → 0`: the ratio at `1e6` is below
    /// `1e-12` or at most half the maximum over the window.
    pub f_primitive_subquadratic_plausible: bool,
}

impl ThresholdReport {
    pub fn build(f: &Nonlinearity, g: &Nonlinearity, gamma: Option<f64>, lambda1: f64) -> Result<Self> {
        let rs = rho_sigma(g);
        let (lo, hi) = lambda_interval(rs.rho, rs.sigma, lambda1)?;
        let at = |x: f64| (f.primitive(x).abs() / (x * x)).max(f.primitive(-x).abs() / (x * x));
        let ratio = logspace(1e4, 1e6, 50).into_iter().map(at).fold(0.0, f64::max);
        let far = at(1e6);
        Ok(Self {
            rho: rs.rho,
            sigma: rs.sigma,
            gamma,
            lambda1,
            lambda_lo: lo,
            lambda_hi: hi,
            rho_sigma_exactness: rs.exactness,
            gamma_exactness: gamma.map(|_| Exactness::Estimated),
            // the discrete eigenvalue is computed, not an analytic value
            lambda1_exactness: Exactness::Estimated,
            p: f.growth_exponent(),
            q: g.growth_exponent(),
            f_primitive_quadratic_ratio: ratio,
            f_primitive_quadratic_ratio_far: far,
            f_primitive_subquadratic_plausible: far <= 1e-12 || far <= 0.5 * ratio,
        })
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda > self.lambda_lo && lambda < self.lambda_hi
    }
}

/// Tolerance for the grid supremum in the sign condition.
pub const CONDITION16_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct Condition16Report {
    pub lambda: f64,
    pub radius: f64,
    pub samples: usize,
    /// `max (λ g(ξ) - F(ξ) f(ξ)) ξ` over the grid.
    pub sup: f64,
    pub argmax: f64,
    pub pass: bool,
    /// The check samples a grid and is not a proof.
    pub grid_based: bool,
    /// Verdict from a closed-form sign analysis, where one is available.
    pub analytic_pass: Option<bool>,
}

/// Symmetric grid on `[-R, R]`: zero, a linear part on `(0, min(1, R)]` and
/// logarithmic tails on `(1, R]`.
pub(crate) fn condition16_grid(radius: f64, samples: usize) -> Vec<f64> {
    let per_side = samples / 2;
    let mut pos = Vec::with_capacity(per_side);
    if radius <= 1.0 {
        pos.extend((1..=per_side).map(|k| radius * k as f64 / per_side as f64));
    } else {
        let n_lin = per_side / 2;
        let n_log = per_side - n_lin;
        pos.extend((1..=n_lin).map(|k| k as f64 / n_lin as f64));
        pos.extend(
            logspace(1.0, radius, n_log + 1)
                .into_iter()
                .skip(1),
        );
    }
    let mut grid: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
    grid.push(0.0);
    grid.extend(pos);
    grid
}

/// Grid check of `sup_ξ (λ g(ξ) - F(ξ) f(ξ)) ξ <= 0`.
pub fn check_condition16(
    f: &Nonlinearity,
    g: &Nonlinearity,
    lambda: f64,
    radius: f64,
    samples: usize,
) -> Result<Condition16Report> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be > 0, got {radius}")));
    }
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    let s = |x: f64| (lambda * g.value(x) - f.primitive(x) * f.value(x)) * x;
    let grid = condition16_grid(radius, samples);
    let (argmax, sup) = grid
        .iter()
        .map(|&x| (x, s(x)))
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(Condition16Report {
        lambda,
        radius,
        samples: grid.len(),
        sup,
        argmax,
        pass: sup <= CONDITION16_TOL,
        grid_based: true,
        analytic_pass: analytic_condition16(f, g, lambda),
    })
}

/// Closed-form verdict for constant `f = c` paired with a built-in `g`.
fn analytic_condition16(f: &Nonlinearity, g: &Nonlinearity, lambda: f64) -> Option<bool> {
    let Kind::Constant { c } = f.kind() else {
        return None;
    };
    // F(ξ) f(ξ) = c² ξ
    let c2 = (c * f.scale()).powi(2);
    let lg = lambda * g.scale();
    match g.kind() {
        // ξ ≤ 0: s = -c² ξ² ≤ 0; ξ > 0: s = ξ² (λ(1 - ξ^{q-1}) - c²), whose sup is
        // approached as ξ → 0⁺
        Kind::PlusPower { .. } if lg >= 0.0 => Some(c2 >= lg * (1.0 - 1e-12)),
        // s = λ c_g ξ - c² ξ²: nonpositive everywhere iff the linear term vanishes
        Kind::Constant { c: cg } => Some(lg * cg == 0.0),
        _ => None,
    }
}
