//! Finite element solver for the Allen-Cahn equation with variable
//! non-degenerate mobility, together with fully computable a posteriori
//! error machinery: elliptic-reconstruction residual indicators, principal
//! eigenvalue tracking along the trajectory, Bregman relative-energy
//! functionals and a conditional Gronwall-type error certificate.
//!
//! The crate is organized along the pipeline:
//! mesh -> fem -> model -> solver -> eigen -> estimator -> certify,
//! with `config`, `sweep` and `report` forming the reproduction harness
//! driven by the `acfem` CLI.

pub mod error;
pub mod mesh;

pub mod fem;

pub mod model;

pub mod solver;

pub use error::{Error, Result};
