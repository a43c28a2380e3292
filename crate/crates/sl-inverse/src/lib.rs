//! Forward and inverse spectral toolkit for Sturm-Liouville operators on
//! [0,1] with complex coefficients and an interior discontinuity.

pub mod basis_lab;
pub mod cauchy;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod maineq;
pub mod ode;
pub mod problem;
pub mod spectra;
pub mod stability;
pub mod trig;

pub use error::{Error, Result};
pub use grid::ComplexGrid;
pub use ode::{integrate_jet, phi_jet, psi_jet, IntegratorOptions, SolutionJet};
pub use problem::{BoundaryH, ProblemSpec};
