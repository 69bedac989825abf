//! Enthalpy solver for the two-phase Stefan problem `h_t = lap chi(h)` and a
//! toolkit for checking numerical solutions against explicit barriers.

pub mod barriers;
pub mod enthalpy;
pub mod error;
pub mod interface;
pub mod mesh;
pub mod oracles;
pub mod quasi;
pub mod stepper;
pub mod viscosity;
pub mod weakform;

pub use enthalpy::{chi, chi_inverse, EnthalpyField, Phase, Selection};
pub use error::{Error, Result};
pub use mesh::{Domain, DomainKind, Grid, ScalarField};
pub use stepper::{solve, BoundaryData, ProblemSpec, Scheme, SolveOptions, Trajectory};
