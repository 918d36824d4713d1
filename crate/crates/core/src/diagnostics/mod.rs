//! Offline invariant audits of a trajectory.
//!
//! Every verdict is recomputed from stored states alone: free energy and
//! dissipation, the remainder identity, the per-step and windowed energy
//! inequalities, weak-form residuals, the closed form of the multiplier on
//! the fully damaged set, the singular test-function estimate and
//! superlevel statistics.

pub mod audit;
pub mod energy;
pub mod estimates;
pub mod report;


pub use audit::{
    damage_balance, derived_xi, energy_ledger, one_sided_test, partial_energy_inequality, remainders, weak_residuals,
    xi_formula_check, WeakResiduals, WindowAudit, XiCheck, ZERO_THRESHOLD,
};
pub use energy::{dissipation, free_energy, Dissipation, FreeEnergy};
pub use estimates::{norm_table, singular_test_estimate, superlevel_stats, NormTable, SingularEstimate, Superlevel};
pub use report::{
    audit_snapshots, audit_trajectory, snapshots, AuditTolerances, DiagnosticsReport, PairAudit, Snapshot, Verdicts,
};
