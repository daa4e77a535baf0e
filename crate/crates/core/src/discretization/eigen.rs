use serde::Serialize;

use crate::discretization::cg::cg_solve_from;
use crate::discretization::operator::LinearOperator;
use crate::discretization::vector::{norm2, scaled};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Normalized to `‖v‖_M = 1`, largest-magnitude entry positive.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖A v - λ M v‖₂`.
    pub residual: f64,
}

const MAX_INVERSE_ITERATIONS: usize = 500;

/// Smallest generalized eigenpair of `A v = λ M v` by inverse iteration.
///
/// Each step solves `A w = M v` with CG. Stops once consecutive Rayleigh
/// quotients agree to `tol * λ` and the eigen-residual is at most `tol`.
pub fn smallest_eigenpair(a: &LinearOperator, m: &LinearOperator, tol: f64) -> Result<Eigenpair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eigen tolerance must be > 0, got {tol}"
        )));
    }
    let n = a.dim();
    if m.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.dim(),
        });
    }
    let cg_max = 10 * n + 100;

    let mut v = vec![1.0; n];
    let vn = m.norm(&v);
    v.iter_mut().for_each(|x| *x /= vn);
    let mut rq = a.quad_form(&v);
    let mut residual = f64::INFINITY;

    for it in 1..=MAX_INVERSE_ITERATIONS {
        let rhs = m.apply(&v);
        let guess = scaled(1.0 / rq, &v);
        // the eigen-residual settles near rq * ‖A w - M v‖, so solve to tol / (2 rq);
        // relative CG residuals far below eps * cond(A) are unattainable, hence the floor
        let cg_tol = (tol / (2.0 * rq * norm2(&rhs))).clamp(1e-13, 1e-6);
        let w = match cg_solve_from(a, &rhs, Some(&guess), cg_tol, cg_max) {
            Ok(sol) => sol.x,
            Err(Error::CgNotConverged { best, .. }) => best,
            Err(e) => return Err(e),
        };
        let wn = m.norm(&w);
        if !(wn > 0.0 && wn.is_finite()) {
            return Err(Error::EigenNotConverged {
                iterations: it,
                estimate: rq,
                residual,
            });
        }
        v = scaled(1.0 / wn, &w);
        let rq_new = a.quad_form(&v);

        let av = a.apply(&v);
        let mv = m.apply(&v);
        let r: Vec<f64> = av.iter().zip(&mv).map(|(a, m)| a - rq_new * m).collect();
        residual = norm2(&r);

        let settled = (rq_new - rq).abs() < tol * rq_new.abs();
        rq = rq_new;
        if settled && residual <= tol {
            fix_sign(&mut v);
            return Ok(Eigenpair {
                lambda: rq,
                vector: v,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::EigenNotConverged {
        iterations: MAX_INVERSE_ITERATIONS,
        estimate: rq,
        residual,
    })
}

/// Flips `v` so its largest-magnitude entry is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let imax = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, x)| {
            if x.abs() > bv {
                (i, x.abs())
            } else {
                (bi, bv)
            }
        })
        .0;
    if v.get(imax).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Closed-form smallest eigenvalue of the 1D stencil on `(0, a)` with `n`
/// cells: `(2/h²)(1 - cos(πh/a))`.
pub fn discrete_lambda1_interval(a: f64, n: usize) -> f64 {
    let h = a / n as f64;
    2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h / a).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_mesh;
    use crate::discretization::operator::{mass, stiffness};
    use std::f64::consts::PI;

    #[test]
    fn n4_matches_closed_form() {
        let mesh = build_mesh(1, 4, &[1.0]).unwrap();
        let ep = smallest_eigenpair(&stiffness(&mesh), &mass(&mesh), 1e-12).unwrap();
        let exact = 32.0 * (1.0 - (PI / 4.0).cos());
        assert!((ep.lambda - exact).abs() < 1e-10, "{}", ep.lambda);
        assert!((exact - 9.37258).abs() < 1e-5);
        assert!(ep.residual <= 1e-12);
        let m = mass(&mesh);
        assert!((m.norm(&ep.vector) - 1.0).abs() < 1e-12);
        assert!(ep.vector.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sine_rayleigh_quotient_n4() {
        let mesh = build_mesh(1, 4, &[1.0]).unwrap();
        let v: Vec<f64> = mesh.node_coords().iter().map(|c| (PI * c[0]).sin()).collect();
        let rq = stiffness(&mesh).quad_form(&v) / mass(&mesh).quad_form(&v);
        assert!((rq - 32.0 * (1.0 - (PI / 4.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn second_order_convergence_1d() {
        let err = |n: usize| {
            let mesh = build_mesh(1, n, &[1.0]).unwrap();
            let ep = smallest_eigenpair(&stiffness(&mesh), &mass(&mesh), 1e-11).unwrap();
            (ep.lambda - PI * PI).abs()
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 4.0 / 1.5 && ratio < 4.0 * 1.5, "ratio {ratio}");
    }

    #[test]
    fn rectangle_eigenvalue() {
        // (0,2) x (0,1): λ₁ = π²(1/4 + 1)
        let mesh = build_mesh(2, 32, &[2.0, 1.0]).unwrap();
        let ep = smallest_eigenpair(&stiffness(&mesh), &mass(&mesh), 1e-10).unwrap();
        let exact = PI * PI * 1.25;
        assert!((ep.lambda - exact).abs() / exact < 1e-2);
    }

    #[test]
    fn closed_form_helper() {
        assert!((discrete_lambda1_interval(1.0, 4) - 32.0 * (1.0 - (PI / 4.0).cos())).abs() < 1e-12);
    }
}
