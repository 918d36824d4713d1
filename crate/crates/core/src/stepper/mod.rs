//! The semi-implicit time-discrete scheme.
//!
//! Each step solves the damage inclusion, the momentum balance and the
//! enthalpy equation in turn and repeats the sweep until the coupled
//! fields stop changing. Diffusion in the damage equation is implicit,
//! conductivity is lagged, the elastic coefficient is split into convex
//! (implicit) and concave (explicit) parts and all temperatures enter
//! through the truncated `Θ_M`.

pub mod data;
pub mod problem;
pub mod run;
pub mod step;
mod substeps;

pub use data::{InitialData, Profile, Sources};
pub use problem::{Problem, StepControls};
pub use run::{run, Simulation, Trajectory};
pub use step::{do_step, elastic_energy, kinetic_energy, EnergyLedger, Remainders, StepOutcome, StepReport};

#[cfg(test)]
mod tests;
