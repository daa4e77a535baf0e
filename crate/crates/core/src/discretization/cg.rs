use crate::discretization::operator::LinearOperator;
use crate::discretization::vector::{axpy, dot, norm2};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b - Ax‖₂ / ‖b‖₂` (true residual, not the recurrence).
    pub relative_residual: f64,
}

/// Conjugate gradients for SPD `a`, starting from zero.
pub fn cg_solve(a: &LinearOperator, b: &[f64], tol: f64, max_iter: usize) -> Result<CgSolution> {
    cg_solve_from(a, b, None, tol, max_iter)
}

/// Conjugate gradients with an optional initial guess.
///
/// Success means `‖b - Ax‖₂ <= tol ‖b‖₂` for the returned `x`, checked on the
/// true residual. When the recurrence claims convergence but the true
/// residual disagrees, the iteration restarts from the current iterate.
pub fn cg_solve_from(
    a: &LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("cg tolerance must be > 0, got {tol}")));
    }
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = tol * bnorm;

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let true_residual = |x: &[f64]| -> Vec<f64> {
        let ax = a.apply(x);
        b.iter().zip(&ax).map(|(b, ax)| b - ax).collect()
    };

    let mut r = true_residual(&x);
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: rr.sqrt() / bnorm,
        });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut best = (rr.sqrt(), x.clone());

    for it in 1..=max_iter {
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // not SPD along p, or breakdown
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);

        if rr_new.sqrt() <= target {
            r = true_residual(&x);
            let res = norm2(&r);
            if res <= target {
                return Ok(CgSolution {
                    x,
                    iterations: it,
                    relative_residual: res / bnorm,
                });
            }
            if res < best.0 {
                best = (res, x.clone());
            }
            rr = dot(&r, &r);
            p.copy_from_slice(&r);
            continue;
        }
        if rr_new.sqrt() < best.0 {
            best = (rr_new.sqrt(), x.clone());
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }

    let res = norm2(&true_residual(&best.1)) / bnorm;
    Err(Error::CgNotConverged {
        iterations: max_iter,
        residual: res,
        best: best.1,
    })
}
