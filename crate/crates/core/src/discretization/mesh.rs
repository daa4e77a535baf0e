use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid over an interval `(0, a)` or a rectangle `(0, a) x (0, b)`.
///
/// Only interior nodes carry unknowns; the Dirichlet boundary is implicit.
/// Interior nodes are ordered lexicographically with the first axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    dim: usize,
    cells_per_side: usize,
    lengths: Vec<f64>,
    h: Vec<f64>,
    interior_count: usize,
    measure: f64,
    node_coords: Vec<Vec<f64>>,
}

impl Mesh {
    pub fn new(dim: usize, n: usize, lengths: &[f64]) -> Result<Self> {
        build_mesh(dim, n, lengths)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Grid spacing per axis.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn interior_count(&self) -> usize {
        self.interior_count
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn node_coords(&self) -> &[Vec<f64>] {
        &self.node_coords
    }

    /// Volume attached to every interior node, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Interior nodes per axis (`n - 1`).
    pub(crate) fn per_axis(&self) -> usize {
        self.cells_per_side - 1
    }
}

pub fn build_mesh(dim: usize, n: usize, lengths: &[f64]) -> Result<Mesh> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidMesh(format!("dim must be 1 or 2, got {dim}")));
    }
    if n < 2 {
        return Err(Error::InvalidMesh(format!(
            "need at least 2 cells per side, got {n}"
        )));
    }
    if lengths.len() != dim {
        return Err(Error::InvalidMesh(format!(
            "expected {dim} side lengths, got {}",
            lengths.len()
        )));
    }
    if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::InvalidMesh(format!(
            "side lengths must be positive and finite: {lengths:?}"
        )));
    }

    let h: Vec<f64> = lengths.iter().map(|&l| l / n as f64).collect();
    let m = n - 1;
    let node_coords: Vec<Vec<f64>> = match dim {
        1 => (1..=m).map(|i| vec![i as f64 * h[0]]).collect(),
        _ => (1..=m)
            .flat_map(|j| (1..=m).map(move |i| (i, j)))
            .map(|(i, j)| vec![i as f64 * h[0], j as f64 * h[1]])
            .collect(),
    };

    Ok(Mesh {
        dim,
        cells_per_side: n,
        lengths: lengths.to_vec(),
        interior_count: node_coords.len(),
        measure: lengths.iter().product(),
        h,
        node_coords,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_n4() {
        let mesh = build_mesh(1, 4, &[1.0]).unwrap();
        assert_eq!(mesh.interior_count(), 3);
        assert_eq!(mesh.h(), &[0.25]);
        assert_eq!(mesh.measure(), 1.0);
        let xs: Vec<f64> = mesh.node_coords().iter().map(|c| c[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn square_n3_lexicographic() {
        let mesh = build_mesh(2, 3, &[1.0, 1.0]).unwrap();
        assert_eq!(mesh.interior_count(), 4);
        let expect = [(1, 1), (2, 1), (1, 2), (2, 2)];
        for (c, (i, j)) in mesh.node_coords().iter().zip(expect) {
            assert!((c[0] - i as f64 / 3.0).abs() < 1e-15);
            assert!((c[1] - j as f64 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_degenerate() {
        assert!(build_mesh(1, 1, &[1.0]).is_err());
        assert!(build_mesh(1, 4, &[0.0]).is_err());
        assert!(build_mesh(1, 4, &[-1.0]).is_err());
        assert!(build_mesh(3, 4, &[1.0, 1.0, 1.0]).is_err());
        assert!(build_mesh(2, 4, &[1.0]).is_err());
    }

    #[test]
    fn nodes_strictly_inside_rectangle() {
        let mesh = build_mesh(2, 7, &[2.0, 0.5]).unwrap();
        assert_eq!(mesh.interior_count(), 36);
        assert_eq!(mesh.measure(), 1.0);
        for c in mesh.node_coords() {
            assert!(c[0] > 0.0 && c[0] < 2.0);
            assert!(c[1] > 0.0 && c[1] < 0.5);
        }
    }
}
