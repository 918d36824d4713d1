//! Meshes, quadrature, finite-element assembly and the p-Laplacian.
//!
//! P1 elements on the unit interval and Q1 elements on the unit square,
//! both with tensor 3-point Gauss rules. All nonlinear coefficients are
//! evaluated at the same quadrature points so that discrete identities
//! between the forms of the scheme hold exactly.

pub mod assembly;
pub mod mesh;
pub mod plaplace;
pub mod state;

pub use assembly::{
    assemble_elasticity, assemble_mass, assemble_vector_mass, assemble_weighted_stiffness,
    integrate_against_divergence, integrate_against_shape, integrate_vector_load, lumped_masses,
};
pub use mesh::Mesh;
pub use plaplace::{PLaplacian, DEFAULT_EPS_P};
pub use state::FieldState;
