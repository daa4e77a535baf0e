//! Scalar nonlinearities `f`, `g` with their primitives, and the threshold
//! quantities built from them.

pub mod quadrature;
pub mod thresholds;

use serde::Serialize;

use crate::error::{Error, Result};
use quadrature::adaptive_simpson;

pub use thresholds::{
    check_condition16, gamma_corollary2, lambda_interval, rho_sigma, Condition16Report,
    Exactness, RhoSigma, ThresholdReport,
};

/// Absolute tolerance of quadrature-backed primitives.
pub const PRIMITIVE_QUAD_TOL: f64 = 1e-12;

/// Piecewise-linear function through strictly increasing abscissae, extended
/// linearly past both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // integration knots: xs with 0 inserted, and ∫_0^{knot} at each
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Table {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(
                "table needs at least two points".into(),
            ));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidArgument("table entries must be finite".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument(format!(
                "table abscissae must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let mut table = Table {
            xs,
            ys,
            knots: Vec::new(),
            cumulative: Vec::new(),
        };

        let mut knots = table.xs.clone();
        if let Err(pos) = knots.binary_search_by(|k| k.total_cmp(&0.0)) {
            knots.insert(pos, 0.0);
        }
        let zero = knots.iter().position(|&k| k == 0.0).unwrap();
        let mut cumulative = vec![0.0; knots.len()];
        let f = |x: f64| table.eval(x);
        for i in zero + 1..knots.len() {
            cumulative[i] =
                cumulative[i - 1] + adaptive_simpson(&f, knots[i - 1], knots[i], PRIMITIVE_QUAD_TOL);
        }
        for i in (0..zero).rev() {
            cumulative[i] =
                cumulative[i + 1] - adaptive_simpson(&f, knots[i], knots[i + 1], PRIMITIVE_QUAD_TOL);
        }
        table.knots = knots;
        table.cumulative = cumulative;
        Ok(table)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn primitive(&self, x: f64) -> f64 {
        // integrate from the neighbouring knot on the side of zero, so small
        // |x| never cancels against large cumulative values
        let i = if x >= 0.0 {
            self.knots.partition_point(|&k| k <= x) - 1
        } else {
            self.knots.partition_point(|&k| k < x).min(self.knots.len() - 1)
        };
        let f = |t: f64| self.eval(t);
        self.cumulative[i] + adaptive_simpson(&f, self.knots[i], x, PRIMITIVE_QUAD_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// `ξ⁺ - (ξ⁺)^q`
    PlusPower { q: f64 },
    Constant { c: f64 },
    Table(Table),
}

/// Which built-in to construct.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    PlusPower { q: f64 },
    ConstantOne,
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

/// A continuous scalar function with its primitive `∫_0^ξ`, optionally
/// multiplied by a positive scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    name: String,
    kind: Kind,
    scale: f64,
    growth_exponent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearitySummary {
    pub name: String,
    pub scale: f64,
    pub growth_exponent: f64,
    pub primitive_closed_form: bool,
}

pub fn make_builtin(spec: Builtin) -> Result<Nonlinearity> {
    match spec {
        Builtin::PlusPower { q } => {
            if !(q > 1.0 && q.is_finite()) {
                return Err(Error::Hypothesis(format!(
                    "plus_power needs q > 1 (got {q})"
                )));
            }
            Ok(Nonlinearity {
                name: format!("plus_power(q={q})"),
                kind: Kind::PlusPower { q },
                scale: 1.0,
                growth_exponent: q,
            })
        }
        Builtin::ConstantOne => Ok(Nonlinearity {
            name: "constant_one".into(),
            kind: Kind::Constant { c: 1.0 },
            scale: 1.0,
            growth_exponent: 0.0,
        }),
        Builtin::Constant(c) => {
            if !c.is_finite() {
                return Err(Error::InvalidArgument("constant must be finite".into()));
            }
            Ok(Nonlinearity {
                name: format!("constant({c})"),
                kind: Kind::Constant { c },
                scale: 1.0,
                growth_exponent: 0.0,
            })
        }
        Builtin::Table(points) => Ok(Nonlinearity {
            name: format!("table({} points)", points.len()),
            kind: Kind::Table(Table::new(&points)?),
            scale: 1.0,
            // linear extrapolation past the ends
            growth_exponent: 1.0,
        }),
    }
}

impl Nonlinearity {
    pub fn plus_power(q: f64) -> Result<Self> {
        make_builtin(Builtin::PlusPower { q })
    }

    pub fn constant_one() -> Self {
        make_builtin(Builtin::ConstantOne).expect("constant_one is valid")
    }

    pub fn constant(c: f64) -> Result<Self> {
        make_builtin(Builtin::Constant(c))
    }

    pub fn table(points: &[(f64, f64)]) -> Result<Self> {
        make_builtin(Builtin::Table(points.to_vec()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `p` (for `f`) or `q` (for `g`) in `|φ(ξ)| ≤ C(1 + |ξ|^p)`.
    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn primitive_closed_form(&self) -> bool {
        !matches!(self.kind, Kind::Table(_))
    }

    pub fn summary(&self) -> NonlinearitySummary {
        NonlinearitySummary {
            name: self.name.clone(),
            scale: self.scale,
            growth_exponent: self.growth_exponent,
            primitive_closed_form: self.primitive_closed_form(),
        }
    }

    /// `c · self`, with the primitive scaled identically.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out.name = format!("{c} * {}", self.name);
        out
    }

    pub fn value(&self, xi: f64) -> f64 {
        self.scale * self.unscaled_value(xi)
    }

    fn unscaled_value(&self, xi: f64) -> f64 {
        match &self.kind {
            Kind::PlusPower { q } => {
                let p = xi.max(0.0);
                p - p.powf(*q)
            }
            Kind::Constant { c } => *c,
            Kind::Table(t) => t.eval(xi),
        }
    }

    /// `∫_0^ξ`, closed form where available.
    pub fn primitive(&self, xi: f64) -> f64 {
        let unscaled = match &self.kind {
            Kind::PlusPower { q } => {
                let p = xi.max(0.0);
                0.5 * p * p - p.powf(q + 1.0) / (q + 1.0)
            }
            Kind::Constant { c } => c * xi,
            Kind::Table(t) => t.primitive(xi),
        };
        self.scale * unscaled
    }

    /// `∫_0^ξ` by adaptive Simpson regardless of kind.
    pub fn primitive_by_quadrature(&self, xi: f64) -> f64 {
        let f = |t: f64| self.value(t);
        adaptive_simpson(&f, 0.0, xi, PRIMITIVE_QUAD_TOL)
    }

    /// Derivative for Jacobians. For `plus_power` the kink at zero takes the
    /// right derivative, so the branch is active iff `ξ >= 0`; tables use
    /// central differences.
    pub fn derivative(&self, xi: f64) -> f64 {
        let unscaled = match &self.kind {
            Kind::PlusPower { q } => {
                if xi >= 0.0 {
                    1.0 - q * xi.powf(q - 1.0)
                } else {
                    0.0
                }
            }
            Kind::Constant { .. } => 0.0,
            Kind::Table(t) => {
                let d = 1e-7 * xi.abs().max(1.0);
                (t.eval(xi + d) - t.eval(xi - d)) / (2.0 * d)
            }
        };
        self.scale * unscaled
    }

    /// Validates the Sobolev-type growth bound on the exponent for a domain
    /// of dimension `dim`: `p < 2/(dim-2)` for `f`, `q < (dim+2)/(dim-2)`
    /// for `g`. No restriction for `dim <= 2`.
    pub fn check_growth(&self, role: Role, dim: usize) -> Result<()> {
        if dim <= 2 {
            return Ok(());
        }
        let d = dim as f64;
        let bound = match role {
            Role::Forcing => 2.0 / (d - 2.0),
            Role::Reaction => (d + 2.0) / (d - 2.0),
        };
        if self.growth_exponent < bound {
            Ok(())
        } else {
            Err(Error::Hypothesis(format!(
                "growth exponent {} of {} must be < {bound} in dimension {dim}",
                self.growth_exponent, self.name
            )))
        }
    }
}

/// Which slot a nonlinearity fills: `f` multiplies the forcing `α`,
/// `g` is multiplied by `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Forcing,
    Reaction,
}

/// `f = sqrt(λ/γ) · h`.
pub fn scale_f_corollary2(h: &Nonlinearity, lambda: f64, gamma: f64) -> Result<Nonlinearity> {
    if !(gamma > 0.0) {
        return Err(Error::Hypothesis(format!(
            "gamma = {gamma} is not positive; requires inf over [0,1] of h > 0"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be > 0 for the scaling, got {lambda}"
        )));
    }
    let c = (lambda / gamma).sqrt();
    let mut f = h.scaled(c);
    f.name = format!("sqrt(lambda/gamma) * {}", h.name);
    Ok(f)
}
