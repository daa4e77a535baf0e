//! Discrete energy functionals, their gradients (weak-form residuals) and
//! the saddle functional `Φ(u, y)`.
//!
//! All nonlinear terms use the lumped quadrature of the mass matrix, so each
//! residual is the exact gradient of the corresponding discrete energy.

use std::sync::Arc;

use serde::Serialize;

use crate::discretization::vector::{dot, norm2};
use crate::discretization::{CsrMatrix, Discretization, Field};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;

/// Data of `-Δu = α(x) f(u) + λ g(u)` on a fixed mesh.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub disc: Arc<Discretization>,
    pub f: Nonlinearity,
    pub g: Nonlinearity,
    pub lambda: f64,
    pub alpha: Field,
}

/// Which equation a residual refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// `-Δu = α f(u) + λ g(u)`
    Main,
    /// `-Δu = -F(u) f(u) + λ g(u)`
    Auxiliary,
}

impl ProblemConfig {
    pub fn new(
        disc: Arc<Discretization>,
        f: Nonlinearity,
        g: Nonlinearity,
        lambda: f64,
        alpha: Field,
    ) -> Result<Self> {
        disc.check_len(alpha.values())?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            disc,
            f,
            g,
            lambda,
            alpha,
        })
    }

    pub fn with_alpha(&self, alpha: Field) -> Result<Self> {
        self.disc.check_len(alpha.values())?;
        Ok(Self {
            alpha,
            ..self.clone()
        })
    }

    pub fn n(&self) -> usize {
        self.disc.n()
    }

    fn m(&self) -> &[f64] {
        self.disc.mass_diag()
    }

    /// `J(u) = ½uᵀAu - Σ mᵢ αᵢ F(uᵢ) - λ Σ mᵢ G(uᵢ)`
    pub fn energy(&self, u: &[f64]) -> f64 {
        let quad = 0.5 * self.disc.stiffness.quad_form(u);
        let a = self.alpha.values();
        let nonlinear: f64 = self
            .m()
            .iter()
            .zip(u)
            .zip(a)
            .map(|((m, &u), a)| m * (a * self.f.primitive(u) + self.lambda * self.g.primitive(u)))
            .sum();
        quad - nonlinear
    }

    /// `r(u) = Au - M(α ⊙ f(u)) - λ M g(u)`, the gradient of [`Self::energy`].
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.disc.stiffness.apply(u);
        for (((ri, m), &ui), a) in r.iter_mut().zip(self.m()).zip(u).zip(self.alpha.values()) {
            *ri -= m * (a * self.f.value(ui) + self.lambda * self.g.value(ui));
        }
        r
    }

    /// `J₈(u) = ½uᵀAu + ½ Σ mᵢ F(uᵢ)² - λ Σ mᵢ G(uᵢ)`
    pub fn energy_auxiliary(&self, u: &[f64]) -> f64 {
        let quad = 0.5 * self.disc.stiffness.quad_form(u);
        let nonlinear: f64 = self
            .m()
            .iter()
            .zip(u)
            .map(|(m, &u)| m * (0.5 * self.f.primitive(u).powi(2) - self.lambda * self.g.primitive(u)))
            .sum();
        quad + nonlinear
    }

    /// `r₈(u) = Au + M(F(u) ⊙ f(u)) - λ M g(u)`
    pub fn residual_auxiliary(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.disc.stiffness.apply(u);
        for ((ri, m), &ui) in r.iter_mut().zip(self.m()).zip(u) {
            *ri += m * (self.f.primitive(ui) * self.f.value(ui) - self.lambda * self.g.value(ui));
        }
        r
    }

    /// Diagonal `d` with `∇r(u) = A + diag(d)`.
    pub fn jacobian_shift(&self, eq: Equation, u: &[f64]) -> Vec<f64> {
        match eq {
            Equation::Main => self
                .m()
                .iter()
                .zip(u)
                .zip(self.alpha.values())
                .map(|((m, &u), a)| -m * (a * self.f.derivative(u) + self.lambda * self.g.derivative(u)))
                .collect(),
            Equation::Auxiliary => self
                .m()
                .iter()
                .zip(u)
                .map(|(m, &u)| {
                    let fv = self.f.value(u);
                    m * (fv * fv + self.f.primitive(u) * self.f.derivative(u)
                        - self.lambda * self.g.derivative(u))
                })
                .collect(),
        }
    }

    /// Jacobian of the residual; also the energy Hessian.
    pub fn jacobian(&self, eq: Equation, u: &[f64]) -> CsrMatrix {
        self.disc
            .stiffness_csr()
            .with_diagonal_shift(&self.jacobian_shift(eq, u))
    }

    pub fn energy_of(&self, eq: Equation, u: &[f64]) -> f64 {
        match eq {
            Equation::Main => self.energy(u),
            Equation::Auxiliary => self.energy_auxiliary(u),
        }
    }

    pub fn residual_of(&self, eq: Equation, u: &[f64]) -> Vec<f64> {
        match eq {
            Equation::Main => self.residual(u),
            Equation::Auxiliary => self.residual_auxiliary(u),
        }
    }

    /// `‖r‖_{L²}` of a dual vector, i.e. `sqrt(rᵀM⁻¹r)`.
    pub fn residual_norm(&self, r: &[f64]) -> f64 {
        self.disc.dual_l2_norm(r)
    }

    /// `Φ(u, y) = ½uᵀAu - ½yᵀMy - Σ mᵢ yᵢ F(uᵢ) - λ Σ mᵢ G(uᵢ)`
    pub fn saddle_phi(&self, u: &[f64], y: &[f64]) -> f64 {
        let quad = 0.5 * self.disc.stiffness.quad_form(u) - 0.5 * self.disc.mass.quad_form(y);
        let rest: f64 = self
            .m()
            .iter()
            .zip(u)
            .zip(y)
            .map(|((m, &u), y)| m * (y * self.f.primitive(u) + self.lambda * self.g.primitive(u)))
            .sum();
        quad - rest
    }

    /// Partial gradients `(∂Φ/∂u, ∂Φ/∂y)` as dual vectors.
    pub fn saddle_gradients(&self, u: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut du = self.disc.stiffness.apply(u);
        for (((d, m), &ui), yi) in du.iter_mut().zip(self.m()).zip(u).zip(y) {
            *d -= m * (yi * self.f.value(ui) + self.lambda * self.g.value(ui));
        }
        let dy = self
            .m()
            .iter()
            .zip(u)
            .zip(y)
            .map(|((m, &u), y)| -m * (y + self.f.primitive(u)))
            .collect();
        (du, dy)
    }

    /// `y = -F(u)`, the maximizer of `Φ(u, ·)`.
    pub fn saddle_maximizer(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&x| -self.f.primitive(x)).collect()
    }
}

pub fn energy(u: &Field, cfg: &ProblemConfig) -> f64 {
    cfg.energy(u.values())
}

pub fn residual(u: &Field, cfg: &ProblemConfig) -> Field {
    Field::from_vec(cfg.residual(u.values()))
}

pub fn residual_auxiliary(u: &Field, cfg: &ProblemConfig) -> Field {
    Field::from_vec(cfg.residual_auxiliary(u.values()))
}

pub fn saddle_phi(u: &Field, y: &Field, cfg: &ProblemConfig) -> f64 {
    cfg.saddle_phi(u.values(), y.values())
}

/// Outcome of comparing a central difference of the energy with `vᵀr(u)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GradientCheck {
    pub finite_difference: f64,
    pub directional: f64,
    pub abs_error: f64,
    /// `abs_error / (‖v‖₂ ‖r(u)‖₂)`, the Cauchy–Schwarz bound on `|vᵀr|`.
    pub relative: f64,
}

/// Compares `(J(u+εv) - J(u-εv))/(2ε)` with `vᵀr(u)`.
pub fn gradient_check(u: &[f64], v: &[f64], cfg: &ProblemConfig, eps: f64) -> Result<GradientCheck> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    cfg.disc.check_len(u)?;
    cfg.disc.check_len(v)?;
    let plus: Vec<f64> = u.iter().zip(v).map(|(u, v)| u + eps * v).collect();
    let minus: Vec<f64> = u.iter().zip(v).map(|(u, v)| u - eps * v).collect();
    let fd = (cfg.energy(&plus) - cfg.energy(&minus)) / (2.0 * eps);
    let r = cfg.residual(u);
    let exact = dot(v, &r);
    let abs_error = (fd - exact).abs();
    let bound = norm2(v) * norm2(&r);
    Ok(GradientCheck {
        finite_difference: fd,
        directional: exact,
        abs_error,
        relative: if bound > 0.0 { abs_error / bound } else { abs_error },
    })
}
