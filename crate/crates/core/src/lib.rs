//! Finite-element simulator for a thermoviscoelastic damage system.
//!
//! The heat equation is written in enthalpy form (`w = ĉ(θ)`), the heat
//! conductivity and the inverse enthalpy map are truncated at a level `M`, and
//! time is advanced by a semi-implicit Euler scheme whose explicit/implicit
//! coefficient placement makes a discrete energy inequality hold step by step.
//! Every step is audited: positivity of the enthalpy, irreversibility of the
//! damage, the remainder cancellation of the energy estimate and the partial
//! energy inequality are recomputed from the stored trajectory.
//!
//! Module map:
//!
//! * [`constitutive`]: coefficient families, enthalpy transformation,
//!   truncation, convex-concave splitting and exponent algebra.
//! * [`discretization`]: structured P1/Q1 meshes, quadrature and assembly.
//! * [`solver`]: sparse SPD solves and the bound-constrained damage solver.
//! * [`stepper`]: one time step of the coupled scheme and the run driver.
//! * [`diagnostics`]: offline invariant audits of a trajectory.
//! * [`io`]: configuration, experiment drivers and file outputs.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::len_without_is_empty
)]

pub mod constitutive;
pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod io;
pub mod solver;
pub mod stepper;

pub use error::{Error, Result};
