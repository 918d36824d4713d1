//! The trajectory audit and its report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::audit::{
    damage_balance, derived_xi, energy_ledger, partial_energy_inequality, remainders, weak_residuals, xi_formula_check,
    WeakResiduals, WindowAudit, XiCheck,
};
use super::energy::{dissipation, free_energy, Dissipation, FreeEnergy};
use super::estimates::{norm_table, singular_test_estimate, superlevel_stats, NormTable, SingularEstimate, Superlevel};
use crate::discretization::FieldState;
use crate::error::Result;
use crate::stepper::{EnergyLedger, Problem, Remainders, Trajectory};

/// One stored state with the index of the step that produced it and, when
/// persisted, the multiplier `ξ` of that step.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub state: FieldState,
    pub xi: Option<Vec<f64>>,
}

/// Snapshots of every state of a trajectory.
pub fn snapshots(traj: &Trajectory) -> Vec<Snapshot> {
    traj.states
        .iter()
        .enumerate()
        .map(|(k, s)| Snapshot {
            step: k,
            state: s.clone(),
            xi: if k == 0 { None } else { traj.xi.get(k - 1).cloned() },
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditTolerances {
    /// Lower bound for nodal enthalpy.
    pub positivity: f64,
    pub cancellation: f64,
    /// Per-step energy inequality, relative to the ledger scale.
    pub energy: f64,
    /// Windowed partial energy inequality, relative to its scale.
    pub window: f64,
    pub weak: f64,
    pub xi: f64,
    pub singular: f64,
    /// Exponent of the singular test function; `1/σ` when absent.
    pub singular_alpha: Option<f64>,
}

impl Default for AuditTolerances {
    fn default() -> Self {
        AuditTolerances {
            positivity: -1e-12,
            cancellation: 1e-8,
            energy: 1e-8,
            window: 1e-6,
            weak: 1e-8,
            xi: 1e-6,
            singular: 1e-8,
            singular_alpha: None,
        }
    }
}

/// Pass/fail per invariant. Checks that need consecutive states are `None`
/// when no two stored snapshots are consecutive steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub positivity: bool,
    pub irreversibility: bool,
    pub bounds: bool,
    pub remainder_cancellation: Option<bool>,
    pub energy_inequality: Option<bool>,
    pub partial_energy_inequality: Option<bool>,
    pub weak_residuals: Option<bool>,
    pub xi_consistency: Option<bool>,
    pub singular_estimate: Option<bool>,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        self.positivity
            && self.irreversibility
            && self.bounds
            && [
                self.remainder_cancellation,
                self.energy_inequality,
                self.partial_energy_inequality,
                self.weak_residuals,
                self.xi_consistency,
                self.singular_estimate,
            ]
            .iter()
            .all(|v| v.unwrap_or(true))
    }
}

/// Audit of two consecutive states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAudit {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub remainders: Remainders,
    pub cancel_resid: f64,
    pub ledger: EnergyLedger,
    /// `(lhs − rhs)/scale` of the ledger.
    pub relative_excess: f64,
    pub damage_balance: f64,
    pub damage_balance_scale: f64,
    pub dissipation: Dissipation,
    pub weak: WeakResiduals,
    pub xi: XiCheck,
    /// `true` when `ξ` was reconstructed rather than read from storage.
    pub xi_derived: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub free_energy: Vec<FreeEnergy>,
    pub superlevel: Vec<Superlevel>,
    pub truncation: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub pairs: Vec<PairAudit>,
    pub window: Option<WindowAudit>,
    pub norms: NormTable,
    pub singular: Option<SingularEstimate>,
    pub verdicts: Verdicts,
    pub tolerances: AuditTolerances,
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.all_pass()
    }

    pub fn max_cancel_resid(&self) -> f64 {
        self.pairs.iter().fold(0.0, |m, p| m.max(p.cancel_resid))
    }

    pub fn max_relative_excess(&self) -> f64 {
        self.pairs
            .iter()
            .fold(f64::NEG_INFINITY, |m, p| m.max(p.relative_excess))
    }

    pub fn max_weak_residual(&self) -> f64 {
        self.pairs.iter().fold(0.0, |m, p| m.max(p.weak.max()))
    }

    pub fn max_xi_discrepancy(&self) -> f64 {
        self.pairs.iter().fold(0.0, |m, p| m.max(p.xi.max()))
    }
}

fn audit_pair(pr: &Problem, a: &Snapshot, b: &Snapshot) -> Result<PairAudit> {
    let (prev, next) = (&a.state, &b.state);
    let rem = remainders(pr, prev, next);
    let ledger = energy_ledger(pr, prev, next);
    let (balance, bscale) = damage_balance(pr, prev, next);
    let (xi, xi_derived) = match &b.xi {
        Some(x) => (x.clone(), false),
        None => (derived_xi(pr, prev, next), true),
    };
    Ok(PairAudit {
        step: b.step,
        t: next.t,
        tau: next.t - prev.t,
        remainders: rem,
        cancel_resid: rem.cancellation_residual(ledger.scale()),
        ledger,
        relative_excess: ledger.excess() / ledger.scale().max(f64::MIN_POSITIVE),
        damage_balance: balance,
        damage_balance_scale: bscale,
        dissipation: dissipation(pr, prev, next),
        weak: weak_residuals(pr, prev, next, &xi)?,
        xi: xi_formula_check(pr, prev, next, &xi),
        xi_derived,
    })
}

/// Audits stored snapshots, which must be ordered by step.
pub fn audit_snapshots(problem: &Problem, snaps: &[Snapshot], tol: &AuditTolerances) -> Result<DiagnosticsReport> {
    let mut notes = vec!["the f(θ) summand of the free energy is analysis-only and omitted".to_string()];
    let states: Vec<FieldState> = snaps.iter().map(|s| s.state.clone()).collect();
    let m = problem.model.enthalpy.truncation();

    let consecutive: Vec<usize> = (1..snaps.len())
        .filter(|&k| snaps[k].step == snaps[k - 1].step + 1)
        .collect();
    let pairs: Vec<PairAudit> = consecutive
        .par_iter()
        .map(|&k| audit_pair(problem, &snaps[k - 1], &snaps[k]))
        .collect::<Result<_>>()?;
    if pairs.len() + 1 < snaps.len() {
        notes.push(format!(
            "{} of {} snapshot pairs are not consecutive steps and were skipped by step audits",
            snaps.len() - 1 - pairs.len(),
            snaps.len().saturating_sub(1)
        ));
    }
    if pairs.iter().any(|p| p.xi_derived) {
        notes.push("ξ reconstructed from the damage residual where it was not stored".to_string());
    }

    let w_min = states.iter().flat_map(|s| &s.w).fold(f64::INFINITY, |a, b| a.min(*b));
    let w_max = states
        .iter()
        .flat_map(|s| &s.w)
        .fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let irreversibility = states
        .windows(2)
        .all(|p| p[1].chi.iter().zip(&p[0].chi).all(|(a, b)| a <= b));
    let bounds = states.iter().all(|s| s.chi.iter().all(|c| (0.0..=1.0).contains(c)));

    let window = if pairs.is_empty() || pairs.len() + 1 != snaps.len() {
        None
    } else {
        let balances: Vec<f64> = pairs.iter().map(|p| p.damage_balance).collect();
        let mags: Vec<f64> = pairs.iter().map(|p| p.damage_balance_scale).collect();
        let level = problem.plap.energy(&problem.mesh, &states[0].chi);
        Some(partial_energy_inequality(&balances, &mags, level))
    };

    let co = &problem.model.coeffs;
    let alpha = tol.singular_alpha.unwrap_or(1.0 / co.sigma);
    let singular = if pairs.len() + 1 == snaps.len() && snaps.len() > 1 {
        match singular_test_estimate(problem, &states, alpha, tol.singular) {
            Ok(s) => Some(s),
            Err(e) => {
                notes.push(format!("singular estimate skipped: {e}"));
                None
            }
        }
    } else {
        None
    };

    let any = !pairs.is_empty();
    let check = |ok: bool| if any { Some(ok) } else { None };
    let verdicts = Verdicts {
        positivity: w_min >= tol.positivity,
        irreversibility,
        bounds,
        remainder_cancellation: check(pairs.iter().all(|p| p.cancel_resid <= tol.cancellation)),
        energy_inequality: check(pairs.iter().all(|p| p.relative_excess <= tol.energy)),
        partial_energy_inequality: window.map(|w| w.max_slack <= tol.window * w.scale),
        weak_residuals: check(pairs.iter().all(|p| p.weak.max() <= tol.weak)),
        xi_consistency: check(pairs.iter().all(|p| p.xi.max() <= tol.xi)),
        singular_estimate: singular.map(|s| s.holds),
    };

    Ok(DiagnosticsReport {
        steps: snaps.iter().map(|s| s.step).collect(),
        times: states.iter().map(|s| s.t).collect(),
        free_energy: states.iter().map(|s| free_energy(problem, s)).collect(),
        superlevel: states.iter().map(|s| superlevel_stats(problem, &s.w, m)).collect(),
        truncation: m,
        w_min,
        w_max,
        pairs,
        window,
        norms: norm_table(problem, &states)?,
        singular,
        verdicts,
        tolerances: *tol,
        notes,
    })
}

/// Audits a full trajectory.
pub fn audit_trajectory(problem: &Problem, traj: &Trajectory, tol: &AuditTolerances) -> Result<DiagnosticsReport> {
    audit_snapshots(problem, &snapshots(traj), tol)
}
