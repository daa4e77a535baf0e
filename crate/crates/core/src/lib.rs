#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Discrete semilinear Dirichlet problems `-Δu = α(x) f(u) + λ g(u)` with
//! multiple solutions.
//!
//! The crate assembles finite-difference models on intervals and rectangles,
//! checks the growth and sign hypotheses of the model problem, finds distinct
//! solutions by deflated Newton with multistart, and searches a convex family
//! of forcing terms for one where two solutions share the minimal energy.

pub mod cli;
pub mod discretization;
pub mod energy;
pub mod error;
pub mod explorer;
pub mod extended;
pub mod nonlinearity;
pub mod solvers;

pub use error::{Error, Result};
