use std::sync::OnceLock;

use crate::discretization::banded::BandedLu;
use crate::discretization::mesh::Mesh;
use crate::discretization::vector::dot;
use crate::error::{Error, Result};

/// Compressed sparse row matrix. Column indices within a row are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) out of range for n = {n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate over `(col, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self + diag(shift)`.
    pub fn with_diagonal_shift(&self, shift: &[f64]) -> CsrMatrix {
        assert_eq!(shift.len(), self.n);
        let mut out = self.clone();
        for (i, s) in shift.iter().enumerate() {
            let range = out.row_ptr[i]..out.row_ptr[i + 1];
            let pos = out.col_idx[range.clone()]
                .iter()
                .position(|&c| c == i)
                .expect("structurally missing diagonal");
            out.values[range.start + pos] += s;
        }
        out
    }

    /// Half bandwidth: `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(c, _)| i.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Stiffness,
    Mass,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Sparse(CsrMatrix),
    Diagonal(Vec<f64>),
}

/// Discrete realization of the `H^1_0` (stiffness) or `L^2` (lumped mass)
/// inner product on interior nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    kind: OperatorKind,
    storage: Storage,
}

impl LinearOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Sparse(a) => a.dim(),
            Storage::Diagonal(d) => d.len(),
        }
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Sparse(a) => a.mul_vec_into(x, y),
            Storage::Diagonal(d) => {
                for ((yi, di), xi) in y.iter_mut().zip(d).zip(x) {
                    *yi = di * xi;
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// `x^T Op y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.storage {
            Storage::Diagonal(d) => d.iter().zip(x).zip(y).map(|((d, a), b)| d * a * b).sum(),
            Storage::Sparse(_) => dot(x, &self.apply(y)),
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.inner(x, x)
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.quad_form(x).max(0.0).sqrt()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Sparse(a) => a.diagonal(),
            Storage::Diagonal(d) => d.clone(),
        }
    }

    pub fn as_csr(&self) -> Option<&CsrMatrix> {
        match &self.storage {
            Storage::Sparse(a) => Some(a),
            Storage::Diagonal(_) => None,
        }
    }

    pub fn as_diagonal(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Diagonal(d) => Some(d),
            Storage::Sparse(_) => None,
        }
    }

    pub fn norm_inf(&self) -> f64 {
        match &self.storage {
            Storage::Sparse(a) => a.norm_inf(),
            Storage::Diagonal(d) => d.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// `1D`: `(1/h) tridiag(-1, 2, -1)`. `2D`: five-point stencil scaled by the
/// cell area, so that `v^T A v` approximates the Dirichlet integral.
pub fn stiffness(mesh: &Mesh) -> LinearOperator {
    let m = mesh.per_axis();
    let n = mesh.interior_count();
    let mut trip = Vec::with_capacity(5 * n);
    match mesh.dim() {
        1 => {
            let w = 1.0 / mesh.h()[0];
            for i in 0..m {
                trip.push((i, i, 2.0 * w));
                if i > 0 {
                    trip.push((i, i - 1, -w));
                }
                if i + 1 < m {
                    trip.push((i, i + 1, -w));
                }
            }
        }
        _ => {
            let (hx, hy) = (mesh.h()[0], mesh.h()[1]);
            let (wx, wy) = (hy / hx, hx / hy);
            for j in 0..m {
                for i in 0..m {
                    let k = j * m + i;
                    trip.push((k, k, 2.0 * (wx + wy)));
                    if i > 0 {
                        trip.push((k, k - 1, -wx));
                    }
                    if i + 1 < m {
                        trip.push((k, k + 1, -wx));
                    }
                    if j > 0 {
                        trip.push((k, k - m, -wy));
                    }
                    if j + 1 < m {
                        trip.push((k, k + m, -wy));
                    }
                }
            }
        }
    }
    LinearOperator {
        kind: OperatorKind::Stiffness,
        storage: Storage::Sparse(CsrMatrix::from_triplets(n, trip)),
    }
}

/// Lumped mass: every interior node carries the full cell volume `h^dim`.
pub fn mass(mesh: &Mesh) -> LinearOperator {
    LinearOperator {
        kind: OperatorKind::Mass,
        storage: Storage::Diagonal(vec![mesh.cell_volume(); mesh.interior_count()]),
    }
}

/// Mesh together with its assembled stiffness and mass operators.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub stiffness: LinearOperator,
    pub mass: LinearOperator,
    stiffness_lu: OnceLock<BandedLu>,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Self {
        let stiffness = stiffness(&mesh);
        let mass = mass(&mesh);
        Self {
            mesh,
            stiffness,
            mass,
            stiffness_lu: OnceLock::new(),
        }
    }

    /// Factorization of the stiffness matrix, computed on first use.
    pub fn stiffness_lu(&self) -> &BandedLu {
        self.stiffness_lu.get_or_init(|| {
            BandedLu::factor(self.stiffness_csr()).expect("stiffness is nonsingular")
        })
    }

    /// `A⁻¹ r`.
    pub fn solve_stiffness(&self, r: &[f64]) -> Vec<f64> {
        self.stiffness_lu().solve(r)
    }

    pub fn n(&self) -> usize {
        self.mesh.interior_count()
    }

    pub fn stiffness_csr(&self) -> &CsrMatrix {
        self.stiffness.as_csr().expect("stiffness is sparse")
    }

    pub fn mass_diag(&self) -> &[f64] {
        self.mass.as_diagonal().expect("mass is diagonal")
    }

    /// `‖v‖_{L^2}` under the lumped mass.
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.mass.norm(v)
    }

    /// `‖v‖_{H^1_0}` under the stiffness.
    pub fn h1_norm(&self, v: &[f64]) -> f64 {
        self.stiffness.norm(v)
    }

    /// L² norm of the function represented by a dual vector `r`,
    /// i.e. `sqrt(r^T M^{-1} r)`.
    pub fn dual_l2_norm(&self, r: &[f64]) -> f64 {
        self.mass_diag()
            .iter()
            .zip(r)
            .map(|(m, r)| r * r / m)
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: v.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stiffness_1d_n4_is_tridiag() {
        let mesh = build_mesh(1, 4, &[1.0]).unwrap();
        let a = stiffness(&mesh);
        let csr = a.as_csr().unwrap();
        for i in 0..3 {
            assert_eq!(csr.get(i, i), 8.0);
        }
        assert_eq!(csr.get(0, 1), -4.0);
        assert_eq!(csr.get(1, 0), -4.0);
        assert_eq!(csr.get(1, 2), -4.0);
        assert_eq!(csr.get(0, 2), 0.0);
        assert_eq!(csr.bandwidth(), 1);
    }

    #[test]
    fn stiffness_2d_symmetric_with_band() {
        let mesh = build_mesh(2, 5, &[1.0, 2.0]).unwrap();
        let a = stiffness(&mesh);
        let csr = a.as_csr().unwrap();
        assert!(csr.is_symmetric(0.0));
        assert_eq!(csr.bandwidth(), 4);
    }

    #[test]
    fn mass_entries() {
        let m1 = mass(&build_mesh(1, 4, &[1.0]).unwrap());
        assert_eq!(m1.as_diagonal().unwrap(), &[0.25, 0.25, 0.25]);
        let m2 = mass(&build_mesh(2, 3, &[1.0, 1.0]).unwrap());
        for d in m2.as_diagonal().unwrap() {
            assert!((d - 1.0 / 9.0).abs() < 1e-16);
        }
    }

    #[test]
    fn mass_of_one_close_to_measure() {
        let mesh = build_mesh(1, 1000, &[1.0]).unwrap();
        let h = mesh.h()[0];
        let one = vec![1.0; mesh.interior_count()];
        let total = mass(&mesh).quad_form(&one);
        // exact integral of 1 over (0, 1)
        assert!((total - 1.0).abs() <= 2.0 * h);
    }

    #[test]
    fn quad_form_equals_edge_sum_1d() {
        let mesh = build_mesh(1, 37, &[1.3]).unwrap();
        let h = mesh.h()[0];
        let a = stiffness(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v: Vec<f64> = (0..mesh.interior_count())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            // pad with boundary zeros and sum over all edges
            let mut padded = vec![0.0];
            padded.extend(&v);
            padded.push(0.0);
            let edges: f64 = padded.windows(2).map(|w| (w[1] - w[0]).powi(2) / h).sum();
            let q = a.quad_form(&v);
            assert!(q > 0.0);
            assert!((q - edges).abs() <= 1e-12 * edges);
        }
    }

    #[test]
    fn unit_vector_has_positive_energy() {
        for mesh in [
            build_mesh(1, 9, &[1.0]).unwrap(),
            build_mesh(2, 6, &[1.0, 3.0]).unwrap(),
        ] {
            let a = stiffness(&mesh);
            let mut e1 = vec![0.0; mesh.interior_count()];
            e1[0] = 1.0;
            assert!(a.quad_form(&e1) > 0.0);
        }
    }

    #[test]
    fn diagonal_shift() {
        let mesh = build_mesh(1, 4, &[1.0]).unwrap();
        let a = stiffness(&mesh);
        let shifted = a.as_csr().unwrap().with_diagonal_shift(&[1.0, 2.0, 3.0]);
        assert_eq!(shifted.diagonal(), vec![9.0, 10.0, 11.0]);
        assert_eq!(shifted.get(0, 1), -4.0);
    }
}
