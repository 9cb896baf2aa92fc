//! Quadratic Lagrange finite elements: spaces, assembly, quadrature, norms
//! and the direct solver.

pub mod assemble;
pub mod linalg;
pub mod norms;
pub mod quadrature;
pub mod space;

pub use assemble::{assemble_load, assemble_mass, assemble_stiffness, QuadValues};
pub use linalg::{solve_sparse, BandLu, CsrBuilder, CsrMatrix};
pub use norms::{dual_norm_neg1, grad_norm_lp, l2_norm_sq, l2_project, norm_lp, FnField, NormP, TriField};
pub use quadrature::{gauss_legendre, gauss_legendre_unit, EdgeRule, TriangleRule};
pub use space::{basis_values, FEFunction, FESpace, LOCAL_NODES};
