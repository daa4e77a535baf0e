//! Direct LU factorization with partial pivoting for banded matrices.
//!
//! Used for Jacobian and Hessian solves, which may be indefinite at
//! saddle-type solutions where CG is not applicable.

use crate::discretization::operator::CsrMatrix;
use crate::error::{Error, Result};

/// LU factors of a square band matrix with half bandwidth `kl`.
///
/// Storage is row-major with `2 * kl + 1` upper columns per row, leaving room
/// for the fill-in produced by row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    // row i, column j stored at i * width + (j - i + kl) for j in [i - kl, i + 2 kl]
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let kl = a.bandwidth();
        let width = 3 * kl + 1;
        let mut data = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                data[i * width + (j + kl - i)] = v;
            }
        }
        let scale = a.norm_inf().max(f64::MIN_POSITIVE);
        let mut lu = Self {
            n,
            kl,
            width,
            data,
            pivots: vec![0; n],
        };

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            // pivot search in column k
            let mut p = k;
            let mut pmax = lu.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = lu.at(i, k).abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax <= 1e-300_f64.max(scale * f64::EPSILON * 1e-4) {
                return Err(Error::Singular(k));
            }
            lu.pivots[k] = p;
            let last_col = (k + 2 * kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = lu.at(k, j);
                    let b = lu.at(p, j);
                    *lu.at_mut(k, j) = b;
                    *lu.at_mut(p, j) = a;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + (j + self.kl - i)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.width + (j + self.kl - i)]
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (n, kl) = (self.n, self.kl);
        let mut x = b.to_vec();
        // forward: apply interchanges and unit-lower multipliers in order
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.at(i, k) * xk;
                }
            }
        }
        // backward with U, which has upper bandwidth 2 kl
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + 2 * kl).min(n - 1) {
                s -= self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        x
    }
}
