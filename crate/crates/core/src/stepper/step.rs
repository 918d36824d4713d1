//! One time step: the Gauss–Seidel coupling loop, the remainder terms and
//! the per-step energy ledger.

use serde::{Deserialize, Serialize};

use crate::discretization::FieldState;
use crate::error::{Error, Result};
use crate::stepper::problem::{Problem, StepControls};
use crate::stepper::substeps::{
    damage_substep, heat_couplings, heat_equation_residual, heat_substep, momentum_substep, thermal_load,
    DamageOperator, StepContext,
};

/// Cross-coupling terms of the three tested equations. Their sum equals
/// `∫γ(χ^k)(χ^k − χ^{k−1})` identically.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Remainders {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    /// `∫γ(χ^k)(χ^k − χ^{k−1})`
    pub gamma_work: f64,
}

impl Remainders {
    /// `|R₁+R₂+R₃ − ∫γ(χ^k)Δχ|` relative to the sum of magnitudes plus
    /// `level`, the energy scale of the step. Without `level`, steps on
    /// which every term vanishes would be judged on rounding noise alone.
    pub fn cancellation_residual(&self, level: f64) -> f64 {
        let diff = self.r1 + self.r2 + self.r3 - self.gamma_work;
        let scale = self.r1.abs() + self.r2.abs() + self.r3.abs() + self.gamma_work.abs() + level.abs();
        if scale == 0.0 {
            0.0
        } else {
            diff.abs() / scale
        }
    }
}

/// Terms of the discrete energy balance of one step. The scheme guarantees
/// `lhs() ≤ rhs()` up to solver tolerances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    /// `½‖v^k‖²_M − ½‖v^{k−1}‖²_M`
    pub kinetic: f64,
    /// `½∫b(χ^k)Cε(u^k):ε(u^k) − ½∫b(χ^{k−1})Cε(u^{k−1}):ε(u^{k−1})`
    pub elastic: f64,
    /// `τ∫a(χ^k)μCε(v^k):ε(v^k)`
    pub viscous: f64,
    /// `τ Σ m_i (D_τχ_i)²`
    pub damage_rate: f64,
    /// `E_p(χ^k) − E_p(χ^{k−1})`
    pub gradient: f64,
    /// `∫(w^k − w^{k−1})`
    pub enthalpy: f64,
    /// `τ∫g + ∫ℓ·(u^k − u^{k−1})`
    pub source_work: f64,
    /// `−∫γ(χ^k)(χ^k − χ^{k−1})`
    pub potential_work: f64,
    /// Energy level `½‖v^{k−1}‖²_M + ½∫b(χ^{k−1})E^{k−1} + E_p(χ^{k−1}) +
    /// ∫|w^{k−1}|`, included in [`EnergyLedger::scale`] so that tolerances
    /// stay meaningful for nearly stationary steps.
    pub level: f64,
}

impl EnergyLedger {
    pub fn lhs(&self) -> f64 {
        self.kinetic + self.elastic + self.viscous + self.damage_rate + self.gradient + self.enthalpy
    }

    pub fn rhs(&self) -> f64 {
        self.potential_work + self.source_work
    }

    /// `lhs − rhs`, non-positive for an admissible step.
    pub fn excess(&self) -> f64 {
        self.lhs() - self.rhs()
    }

    /// Sum of the magnitudes of all terms plus the energy level, the
    /// reference for tolerances.
    pub fn scale(&self) -> f64 {
        self.level.abs()
            + [
                self.kinetic,
                self.elastic,
                self.viscous,
                self.damage_rate,
                self.gradient,
                self.enthalpy,
                self.source_work,
                self.potential_work,
            ]
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    /// Time at the end of the step.
    pub t: f64,
    /// Accepted step size.
    pub tau: f64,
    pub tau_halvings: usize,
    pub outer_iterations: usize,
    /// Final relative updates of `u`, `w`, `χ`.
    pub updates: [f64; 3],
    /// Relative residual of the unsplit nonlinear heat equation.
    pub heat_residual: f64,
    /// Relative residual of the last linear heat solve.
    pub heat_linear_residual: f64,
    pub momentum_residual: f64,
    pub obstacle_kkt: f64,
    pub obstacle_complementarity: f64,
    pub obstacle_iterations: usize,
    /// Fraction of nodes with `χ^k = 0`.
    pub fraction_broken: f64,
    /// Fraction of nodes with `χ^k = χ^{k−1}`.
    pub fraction_frozen: f64,
    pub remainders: Remainders,
    pub cancel_resid: f64,
    pub ledger: EnergyLedger,
    /// Largest `b(χ^k) − b(χ^{k−1}) − (b₁'(χ^k)+b₂'(χ^{k−1}))(χ^k−χ^{k−1})`
    /// over quadrature points; non-positive up to rounding.
    pub split_violation: f64,
    pub w_min: f64,
    pub chi_min: f64,
    pub chi_max: f64,
}

impl StepReport {
    /// `τ‖D_τχ‖² + E_p(χ^k) − E_p(χ^{k−1}) + R₂`, non-positive by the
    /// damage inclusion.
    pub fn damage_balance(&self) -> f64 {
        self.ledger.damage_rate + self.ledger.gradient + self.remainders.r2
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: FieldState,
    pub report: StepReport,
    /// Subgradient `ξ^k ≤ 0` of the indicator of `[0, ∞)`, in density units.
    pub xi: Vec<f64>,
    /// Multiplier of the irreversibility bound `χ^k ≤ χ^{k−1}`, density units.
    pub xi_irrev: Vec<f64>,
}

fn relative_update(old: &[f64], new: &[f64]) -> f64 {
    let diff = old.iter().zip(new).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let size = new.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    diff / size
}

fn relax(old: &mut [f64], new: &[f64], omega: f64) {
    for (o, n) in old.iter_mut().zip(new) {
        *o += omega * (n - *o);
    }
}

/// `½∫b(χ)Cε(u):ε(u)`
pub fn elastic_energy(problem: &Problem, chi: &[f64], u: &[f64]) -> f64 {
    let b = &problem.model.coeffs.elasticity;
    let e = problem.strain_energy_density(u);
    let vals: Vec<f64> = problem
        .mesh
        .interpolate_qp(chi)
        .iter()
        .zip(&e)
        .map(|(c, e)| 0.5 * b.value(*c) * e)
        .collect();
    problem.mesh.integrate(&vals)
}

/// `½ vᵀMv` with the consistent vector mass.
pub fn kinetic_energy(problem: &Problem, v: &[f64]) -> f64 {
    0.5 * problem.vector_mass.bilinear(v, v)
}

/// Advances `prev` by `tau`. The inertial term uses the stored velocity
/// `v^{k−1}`, which equals `(u^{k−1} − u^{k−2})/τ` on uniform steps.
pub fn do_step(problem: &Problem, prev: &FieldState, controls: &StepControls, tau: f64) -> Result<StepOutcome> {
    let ctx = StepContext::new(problem, prev, tau);
    let mesh = &problem.mesh;
    let omega = controls.relaxation;
    let reject = |what: &str, e: Error| Error::StepRejected(format!("{what}: {e}"));

    let mut chi = prev.chi.clone();
    let mut u = prev.u.clone();
    let mut w = prev.w.clone();
    let mut last = None;
    let mut momentum_residual = 0.0;
    let mut heat_linear_residual = 0.0;
    let mut updates = [f64::INFINITY; 3];
    let mut iterations = 0;
    while iterations < controls.max_outer_iterations {
        iterations += 1;
        let theta_qp = mesh.interpolate_qp(&problem.theta_nodes(&w));

        let sol = damage_substep(&ctx, controls, &theta_qp, &chi).map_err(|e| reject("damage", e))?;
        let mut chi_new = chi.clone();
        relax(&mut chi_new, &sol.x, omega);
        for (c, up) in chi_new.iter_mut().zip(&prev.chi) {
            *c = c.clamp(0.0, *up);
        }

        let mom = momentum_substep(&ctx, &chi_new, &theta_qp).map_err(|e| reject("momentum", e))?;
        let mut u_new = u.clone();
        relax(&mut u_new, &mom.u, omega);
        momentum_residual = mom.residual;

        let heat = heat_substep(&ctx, &chi_new, &u_new, &w).map_err(|e| reject("heat", e))?;
        let mut w_new = w.clone();
        relax(&mut w_new, &heat.w, omega);
        heat_linear_residual = heat.linear_residual;

        updates = [
            relative_update(&u, &u_new),
            relative_update(&w, &w_new),
            relative_update(&chi, &chi_new),
        ];
        chi = chi_new;
        u = u_new;
        w = w_new;
        last = Some(sol);
        if updates.iter().all(|d| *d < controls.fixed_point_tol) {
            break;
        }
    }
    if !updates.iter().all(|d| *d < controls.fixed_point_tol) {
        return Err(Error::StepRejected(format!(
            "coupling loop did not converge in {iterations} sweeps (updates {updates:?})"
        )));
    }
    let sol = last.expect("at least one sweep");
    if chi.iter().chain(&u).chain(&w).any(|x| !x.is_finite()) {
        return Err(Error::StepRejected("non-finite state".into()));
    }

    let v: Vec<f64> = u.iter().zip(&prev.u).map(|(a, b)| (a - b) / tau).collect();
    let state = FieldState {
        t: prev.t + tau,
        u,
        v,
        w,
        chi,
    };

    let remainders = remainders(&ctx, &state);
    let ledger = ledger(&ctx, &state, &remainders);
    let n = state.chi.len();
    let density = |x: &[f64]| -> Vec<f64> { x.iter().zip(&problem.lumped).map(|(x, m)| x / m).collect() };
    let xi = density(&sol.xi_lower);
    let xi_irrev = density(&sol.xi_upper);
    let report = StepReport {
        step: 0,
        t: state.t,
        tau,
        tau_halvings: 0,
        outer_iterations: iterations,
        updates,
        heat_residual: heat_equation_residual(&ctx, &state.chi, &state.u, &state.w)?,
        heat_linear_residual,
        momentum_residual,
        obstacle_kkt: sol.kkt_residual,
        obstacle_complementarity: sol.complementarity,
        obstacle_iterations: sol.iterations,
        fraction_broken: state.chi.iter().filter(|c| **c == 0.0).count() as f64 / n as f64,
        fraction_frozen: state.chi.iter().zip(&prev.chi).filter(|(a, b)| a == b).count() as f64 / n as f64,
        cancel_resid: remainders.cancellation_residual(ledger.scale()),
        remainders,
        ledger,
        split_violation: split_violation(&ctx, &state.chi),
        w_min: state.w.iter().copied().fold(f64::INFINITY, f64::min),
        chi_min: state.chi.iter().copied().fold(f64::INFINITY, f64::min),
        chi_max: state.chi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(StepOutcome {
        state,
        report,
        xi,
        xi_irrev,
    })
}

/// Each remainder is rebuilt from the assembly routine of its own
/// equation, evaluated at the final fields.
fn remainders(ctx: &StepContext<'_>, state: &FieldState) -> Remainders {
    let pr = ctx.problem;
    let mesh = &pr.mesh;
    let prev = ctx.prev;
    let theta_k_qp = mesh.interpolate_qp(&pr.theta_nodes(&state.w));
    let dchi: Vec<f64> = state.chi.iter().zip(&prev.chi).map(|(a, b)| a - b).collect();
    let du: Vec<f64> = state.u.iter().zip(&prev.u).map(|(a, b)| a - b).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    // momentum tested with Δu, plus the split strain term
    let chi_qp = mesh.interpolate_qp(&state.chi);
    let dchi_qp = mesh.interpolate_qp(&dchi);
    let strain: Vec<f64> = (0..mesh.quad_count())
        .map(|k| -0.5 * (pr.model.split.b1_prime(chi_qp[k]) + ctx.b2p_prev_qp[k]) * ctx.energy_prev_qp[k] * dchi_qp[k])
        .collect();
    let r1 = mesh.integrate(&strain) - dot(&thermal_load(ctx, &theta_k_qp), &du);

    // damage reaction tested with Δχ
    let op = DamageOperator::new(ctx, &theta_k_qp);
    let r2 = dot(&op.reaction(&state.chi), &dchi);

    // heat coupling tested with 1, scaled by τ
    let (s, c) = heat_couplings(ctx, &state.chi, &state.u);
    let theta_k = pr.theta_nodes(&state.w);
    let r3 = ctx.tau * (s.iter().sum::<f64>() + dot(&c, &theta_k));

    let gamma: Vec<f64> = chi_qp
        .iter()
        .zip(&dchi_qp)
        .map(|(c, d)| pr.model.coeffs.gamma(*c) * d)
        .collect();
    Remainders {
        r1,
        r2,
        r3,
        gamma_work: mesh.integrate(&gamma),
    }
}

fn ledger(ctx: &StepContext<'_>, state: &FieldState, rem: &Remainders) -> EnergyLedger {
    let pr = ctx.problem;
    let prev = ctx.prev;
    let tau = ctx.tau;
    let co = &pr.model.coeffs;
    let visc: Vec<f64> = pr
        .at_qp(&state.chi, |c| co.viscosity.value(c) * co.mu)
        .into_iter()
        .zip(pr.strain_energy_density(&state.v))
        .map(|(a, e)| tau * a * e)
        .collect();
    let damage_rate: f64 = (0..state.chi.len())
        .map(|i| {
            let d = state.chi[i] - prev.chi[i];
            pr.lumped[i] * d * d / tau
        })
        .sum();
    let du: Vec<f64> = state.u.iter().zip(&prev.u).map(|(a, b)| a - b).collect();
    let kin = kinetic_energy(pr, &prev.v);
    let ela = elastic_energy(pr, &prev.chi, &prev.u);
    let grad = pr.plap.energy(&pr.mesh, &prev.chi);
    let heat: f64 = pr.lumped.iter().zip(&prev.w).map(|(m, w)| m * w.abs()).sum();
    EnergyLedger {
        kinetic: kinetic_energy(pr, &state.v) - kin,
        elastic: elastic_energy(pr, &state.chi, &state.u) - ela,
        viscous: pr.mesh.integrate(&visc),
        damage_rate,
        gradient: pr.plap.energy(&pr.mesh, &state.chi) - grad,
        enthalpy: pr
            .lumped
            .iter()
            .zip(state.w.iter().zip(&prev.w))
            .map(|(m, (a, b))| m * (a - b))
            .sum(),
        source_work: tau * pr.heat_source_total() + pr.load_work(&du),
        potential_work: -rem.gamma_work,
        level: kin + ela + grad + heat,
    }
}

fn split_violation(ctx: &StepContext<'_>, chi: &[f64]) -> f64 {
    let pr = ctx.problem;
    let split = &pr.model.split;
    let b = &pr.model.coeffs.elasticity;
    pr.mesh
        .interpolate_qp(chi)
        .iter()
        .zip(&ctx.chi_prev_qp)
        .map(|(c, p)| b.value(*c) - b.value(*p) - (split.b1_prime(*c) + split.b2_prime(*p)) * (c - p))
        .fold(f64::NEG_INFINITY, f64::max)
}
