//! Uniform grids, discrete `H^1_0` / `L^2` structure, linear solvers and the
//! first Dirichlet eigenpair.

pub mod banded;
pub mod cg;
pub mod eigen;
pub mod field;
pub mod mesh;
pub mod operator;
pub mod vector;

pub use banded::BandedLu;
pub use cg::{cg_solve, cg_solve_from, CgSolution};
pub use eigen::{discrete_lambda1_interval, smallest_eigenpair, Eigenpair};
pub use field::{read_field_csv, write_field_csv, Field};
pub use mesh::{build_mesh, Mesh};
pub use operator::{mass, stiffness, CsrMatrix, Discretization, LinearOperator, OperatorKind};
