use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::vector::dot;
use crate::energy::ProblemConfig;
use crate::error::{Error, Result};
use crate::extended;

/// Multiples of `±v₁` used as starts for the θ* estimate.
pub const THETA_STAR_SCALES: [f64; 4] = [1e-4, 1e-2, 0.1, 1.0];
const MAX_ITERATIONS: usize = 500;
const MAX_HALVINGS: usize = 40;
const ARMIJO_C: f64 = 1e-4;

/// `I(u) = ½uᵀAu`
fn quad(cfg: &ProblemConfig, u: &[f64]) -> f64 {
    0.5 * cfg.disc.stiffness.quad_form(u)
}

/// `ψ(u) = Σ mᵢ G(uᵢ)`
fn psi(cfg: &ProblemConfig, u: &[f64]) -> f64 {
    cfg.disc
        .mass_diag()
        .iter()
        .zip(u)
        .map(|(m, &x)| m * cfg.g.primitive(x))
        .sum()
}

/// `M g(u)`, the gradient of `ψ`.
fn psi_gradient(cfg: &ProblemConfig, u: &[f64]) -> Vec<f64> {
    cfg.disc
        .mass_diag()
        .iter()
        .zip(u)
        .map(|(m, &x)| m * cfg.g.value(x))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaStar {
    /// Smallest `I/ψ` reached; an upper bound on the infimum.
    pub estimate: f64,
    pub start: String,
    pub iterations: usize,
    pub psi: f64,
    pub l2_norm: f64,
    pub feasible_starts: usize,
}

struct Descent {
    ratio: f64,
    psi: f64,
    u: Vec<f64>,
    iterations: usize,
}

/// Preconditioned descent on `I/ψ` inside `{ψ > 0}`. Steps that leave the
/// region are rejected, which acts as a barrier at `ψ = 0`.
fn descend_ratio(cfg: &ProblemConfig, u0: Vec<f64>) -> Option<Descent> {
    let mut u = u0;
    let mut p = psi(cfg, &u);
    if !(p > 0.0) {
        return None;
    }
    let mut ratio = quad(cfg, &u) / p;
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        // ∇R = (Au - R M g(u)) / ψ, preconditioned by A⁻¹
        let au = cfg.disc.stiffness.apply(&u);
        let grad: Vec<f64> = au
            .iter()
            .zip(psi_gradient(cfg, &u))
            .map(|(a, g)| (a - ratio * g) / p)
            .collect();
        let d: Vec<f64> = cfg.disc.solve_stiffness(&grad).into_iter().map(|x| -x).collect();
        let slope = dot(&grad, &d);
        if !(slope < 0.0) {
            break;
        }
        let dn = cfg.disc.h1_norm(&d);
        let mut s = cfg.disc.h1_norm(&u) / dn;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + s * b).collect();
            let tp = psi(cfg, &trial);
            if tp > 0.0 {
                let tr = quad(cfg, &trial) / tp;
                if tr <= ratio + ARMIJO_C * s * slope {
                    accepted = Some((trial, tp, tr));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((trial, tp, tr)) = accepted else {
            break;
        };
        iterations += 1;
        let improvement = ratio - tr;
        u = trial;
        p = tp;
        ratio = tr;
        if improvement <= 1e-15 * ratio.abs() {
            break;
        }
    }
    Some(Descent {
        ratio,
        psi: p,
        u,
        iterations,
    })
}

/// Upper estimate of `θ* = inf_{ψ>0} I/ψ` by descent from `±t v₁`.
pub fn estimate_theta_star(cfg: &ProblemConfig, v1: &[f64]) -> Result<ThetaStar> {
    cfg.disc.check_len(v1)?;
    let starts: Vec<(String, Vec<f64>)> = THETA_STAR_SCALES
        .iter()
        .flat_map(|&t| {
            [1.0, -1.0].map(|sign| {
                (
                    format!("{}{t}v1", if sign > 0.0 { "+" } else { "-" }),
                    v1.iter().map(|v| sign * t * v).collect(),
                )
            })
        })
        .collect();
    let runs: Vec<_> = starts
        .par_iter()
        .map(|(_, u)| descend_ratio(cfg, u.clone()))
        .collect();
    let feasible_starts = runs.iter().filter(|r| r.is_some()).count();
    let best = runs
        .into_iter()
        .zip(&starts)
        .filter_map(|(r, (label, _))| r.map(|r| (r, label)))
        .min_by(|a, b| a.0.ratio.total_cmp(&b.0.ratio));
    match best {
        Some((d, label)) => Ok(ThetaStar {
            estimate: d.ratio,
            start: label.clone(),
            iterations: d.iterations,
            psi: d.psi,
            l2_norm: cfg.disc.l2_norm(&d.u),
            feasible_starts,
        }),
        None => Err(Error::SearchFailure(
            "psi <= 0 at every probe t*v1, t in {1e-4, 1e-2, 0.1, 1}; no feasible start for the ratio I/psi"
                .into(),
        )),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaTildePoint {
    pub radius: f64,
    /// `min I/ψ` on `{‖u‖_{H¹} = R, ψ > 0}`; `+inf` when no start reaches `ψ > 0`.
    #[serde(serialize_with = "extended::serialize")]
    pub ratio: f64,
    #[serde(serialize_with = "extended::serialize")]
    pub psi_max: f64,
}

/// Projected gradient ascent of `ψ` on the sphere `uᵀAu = R²`.
fn maximize_psi_on_sphere(cfg: &ProblemConfig, u0: &[f64], radius: f64) -> f64 {
    let to_sphere = |v: Vec<f64>| -> Option<Vec<f64>> {
        let n = cfg.disc.h1_norm(&v);
        (n > 0.0 && n.is_finite()).then(|| v.into_iter().map(|x| x * radius / n).collect())
    };
    let Some(mut u) = to_sphere(u0.to_vec()) else {
        return f64::NEG_INFINITY;
    };
    let mut p = psi(cfg, &u);
    let mut s: f64 = 1.0;
    for _ in 0..MAX_ITERATIONS {
        let grad = psi_gradient(cfg, &u);
        let w = cfg.disc.solve_stiffness(&grad);
        let radial = dot(&u, &grad) / (radius * radius);
        let tangent: Vec<f64> = w.iter().zip(&u).map(|(w, u)| w - radial * u).collect();
        let tn = cfg.disc.h1_norm(&tangent);
        if !(tn > 1e-14 * radius) {
            break;
        }
        // start from a step of size comparable to the radius, then adapt
        s = (2.0 * s).min(radius / tn);
        let mut improved = false;
        for _ in 0..MAX_HALVINGS {
            let trial = u.iter().zip(&tangent).map(|(a, b)| a + s * b).collect();
            if let Some(trial) = to_sphere(trial) {
                let tp = psi(cfg, &trial);
                if tp > p {
                    let gain = tp - p;
                    u = trial;
                    p = tp;
                    improved = gain > 1e-15 * p.abs();
                    break;
                }
            }
            s *= 0.5;
        }
        if !improved {
            break;
        }
    }
    p
}

/// Trend of `min I/ψ` over spheres of growing radius.
///
/// Each radius is probed from every start rescaled onto the sphere. The
/// values only describe a trend; they are not a computation of the liminf.
pub fn estimate_theta_tilde(cfg: &ProblemConfig, starts: &[Vec<f64>], radii: &[f64]) -> Result<Vec<ThetaTildePoint>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument(format!("radii must be positive, got {radii:?}")));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("radii must increase, got {radii:?}")));
    }
    for s in starts {
        cfg.disc.check_len(s)?;
    }
    Ok(radii
        .par_iter()
        .map(|&radius| {
            let psi_max = starts
                .iter()
                .map(|s| maximize_psi_on_sphere(cfg, s, radius))
                .fold(f64::NEG_INFINITY, f64::max);
            let ratio = if psi_max > 0.0 {
                0.5 * radius * radius / psi_max
            } else {
                f64::INFINITY
            };
            ThetaTildePoint {
                radius,
                ratio,
                psi_max,
            }
        })
        .collect())
}
