use std::f64::consts::PI;

use serde::Serialize;

use crate::discretization::{Field, Mesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// `α ≡ c`
    Constants,
    /// Constant on `k` equal strips along the first axis.
    PiecewiseConstant { k: usize },
    /// `Σ cⱼ sin(jπ x₁ / L₁)`, `j = 1..k`.
    SineSeries { k: usize },
}

/// Finite-dimensional convex family of coefficients `α`, parametrized by a
/// box of coefficients whose image is bounded by `bound` in sup norm.
#[derive(Debug, Clone)]
pub struct AlphaFamily {
    kind: FamilyKind,
    bound: f64,
    basis: Vec<Vec<f64>>,
}

impl AlphaFamily {
    pub fn new(kind: FamilyKind, bound: f64, mesh: &Mesh) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::ConfigValue {
                key: "alpha.bound".into(),
                message: format!("must be > 0, got {bound}"),
            });
        }
        let coords = mesh.node_coords();
        let length = mesh.lengths()[0];
        let basis = match kind {
            FamilyKind::Constants => vec![vec![1.0; coords.len()]],
            FamilyKind::PiecewiseConstant { k } | FamilyKind::SineSeries { k } if k == 0 => {
                return Err(Error::ConfigValue {
                    key: "alpha.k".into(),
                    message: "must be >= 1".into(),
                });
            }
            FamilyKind::PiecewiseConstant { k } => (0..k)
                .map(|j| {
                    coords
                        .iter()
                        .map(|c| {
                            let strip = ((c[0] / length * k as f64).floor() as usize).min(k - 1);
                            if strip == j {
                                1.0
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect(),
            FamilyKind::SineSeries { k } => (1..=k)
                .map(|j| {
                    coords
                        .iter()
                        .map(|c| (j as f64 * PI * c[0] / length).sin())
                        .collect()
                })
                .collect(),
        };
        Ok(Self { kind, bound, basis })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Number of coefficients.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Box `[-b, b]` for every coefficient. Sine coefficients get `B/k` so
    /// that the sum stays within `B`.
    pub fn coefficient_bound(&self) -> f64 {
        match self.kind {
            FamilyKind::SineSeries { k } => self.bound / k as f64,
            _ => self.bound,
        }
    }

    pub fn contains(&self, coeffs: &[f64]) -> bool {
        let b = self.coefficient_bound();
        coeffs.len() == self.dim() && coeffs.iter().all(|c| c.abs() <= b * (1.0 + 1e-12))
    }

    pub fn field(&self, coeffs: &[f64]) -> Result<Field> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        if !self.contains(coeffs) {
            return Err(Error::InvalidArgument(format!(
                "coefficients {coeffs:?} leave the box [-{b}, {b}]",
                b = self.coefficient_bound()
            )));
        }
        let n = self.basis[0].len();
        let mut values = vec![0.0; n];
        for (c, phi) in coeffs.iter().zip(&self.basis) {
            for (v, p) in values.iter_mut().zip(phi) {
                *v += c * p;
            }
        }
        Ok(Field::from_vec(values))
    }

    /// Default segment direction: all ones, or the first sine mode.
    pub fn default_direction(&self) -> Vec<f64> {
        match self.kind {
            FamilyKind::SineSeries { .. } => {
                let mut d = vec![0.0; self.dim()];
                d[0] = 1.0;
                d
            }
            _ => vec![1.0; self.dim()],
        }
    }

    /// Largest `|t|` for which `t * direction` stays in the box.
    pub fn max_step(&self, direction: &[f64]) -> f64 {
        let dmax = direction.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if dmax == 0.0 {
            f64::INFINITY
        } else {
            self.coefficient_bound() / dmax
        }
    }
}

/// Straight segment `t ↦ t * direction` through the family, `t ∈ [lo, hi]`.
#[derive(Debug, Clone, Serialize)]
pub struct Segment {
    pub direction: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Segment {
    pub fn new(family: &AlphaFamily, direction: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if direction.len() != family.dim() {
            return Err(Error::ConfigValue {
                key: "alpha.direction".into(),
                message: format!("needs {} entries, got {}", family.dim(), direction.len()),
            });
        }
        if !(lo < hi) {
            return Err(Error::ConfigValue {
                key: "alpha.segment".into(),
                message: format!("needs lo < hi, got [{lo}, {hi}]"),
            });
        }
        let reach = family.max_step(&direction);
        if lo.abs() > reach * (1.0 + 1e-12) || hi.abs() > reach * (1.0 + 1e-12) {
            return Err(Error::ConfigValue {
                key: "alpha.segment".into(),
                message: format!("[{lo}, {hi}] leaves the family box (|t| <= {reach})"),
            });
        }
        Ok(Self { direction, lo, hi })
    }

    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        self.direction.iter().map(|d| t * d).collect()
    }

    /// `count` evenly spaced parameters including both ends.
    pub fn grid(&self, count: usize) -> Vec<f64> {
        if count <= 1 {
            return vec![self.hi];
        }
        (0..count)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (count - 1) as f64)
            .collect()
    }
}
