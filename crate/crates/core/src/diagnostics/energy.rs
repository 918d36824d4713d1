//! Free energy of a single state and the dissipation of a step.

use serde::{Deserialize, Serialize};

use crate::discretization::FieldState;
use crate::stepper::Problem;

/// Summands of the free energy plus kinetic energy and enthalpy. The
/// `f(θ)` summand is never instantiated and is reported as omitted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergy {
    /// `(1/p)∫(|∇χ|² + ε_p)^{p/2}`
    pub gradient: f64,
    /// `∫γ̂(χ)`
    pub potential: f64,
    /// `½∫b(χ)Cε(u):ε(u)`
    pub elastic: f64,
    /// `−∫Θ_M(w)χ`
    pub thermal_damage: f64,
    /// `−∫ρ(χ)Θ_M(w) div u`
    pub thermal_expansion: f64,
    /// `false` when `χ < 0` somewhere, i.e. the indicator term is `+∞`.
    pub indicator_finite: bool,
    /// `½‖v‖²` with the consistent mass.
    pub kinetic: f64,
    /// `∫w`
    pub enthalpy: f64,
    pub f_term_omitted: bool,
}

impl FreeEnergy {
    /// Gradient, potential and elastic parts.
    pub fn mechanical(&self) -> f64 {
        self.gradient + self.potential + self.elastic
    }

    /// Kinetic plus mechanical energy plus enthalpy.
    pub fn total(&self) -> f64 {
        self.kinetic + self.mechanical() + self.enthalpy
    }
}

pub fn free_energy(problem: &Problem, state: &FieldState) -> FreeEnergy {
    let mesh = &problem.mesh;
    let co = &problem.model.coeffs;
    let chi = mesh.interpolate_qp(&state.chi);
    let theta = mesh.interpolate_qp(&problem.theta_nodes(&state.w));
    let div = mesh.divergence_qp(&state.u);
    let c = &co.stiffness;
    let strain = mesh.strain_qp(&state.u);
    let nq = mesh.quad_count();
    let mut pot = Vec::with_capacity(nq);
    let mut ela = Vec::with_capacity(nq);
    let mut td = Vec::with_capacity(nq);
    let mut te = Vec::with_capacity(nq);
    for k in 0..nq {
        pot.push(co.gamma_hat(chi[k]));
        ela.push(0.5 * co.elasticity.value(chi[k]) * c.contract(&strain[k], &strain[k]));
        td.push(-theta[k] * chi[k]);
        te.push(-co.thermal_expansion.value(chi[k]) * theta[k] * div[k]);
    }
    FreeEnergy {
        gradient: problem.plap.energy(mesh, &state.chi),
        potential: mesh.integrate(&pot),
        elastic: mesh.integrate(&ela),
        thermal_damage: mesh.integrate(&td),
        thermal_expansion: mesh.integrate(&te),
        indicator_finite: state.chi.iter().all(|c| *c >= 0.0),
        kinetic: 0.5 * problem.vector_mass().bilinear(&state.v, &state.v),
        enthalpy: mesh.integrate(&mesh.interpolate_qp(&state.w)),
        f_term_omitted: true,
    }
}

/// Dissipated amounts over one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dissipation {
    /// `τ∫K_M(w^{k−1})∇w^k·∇Θ_M(w^k)`
    pub conduction: f64,
    /// `τ‖D_τχ‖²` (lumped)
    pub damage_rate: f64,
    /// `τ∫a(χ^k)μCε(v^k):ε(v^k)`
    pub viscous: f64,
}

pub fn dissipation(problem: &Problem, prev: &FieldState, next: &FieldState) -> Dissipation {
    let mesh = &problem.mesh;
    let co = &problem.model.coeffs;
    let tau = next.t - prev.t;
    let kq: Vec<f64> = mesh
        .interpolate_qp(&prev.w)
        .iter()
        .map(|w| problem.model.enthalpy.k_m(*w))
        .collect();
    let gw = mesh.gradient_qp(&next.w);
    let gt = mesh.gradient_qp(&problem.theta_nodes(&next.w));
    let chi = mesh.interpolate_qp(&next.chi);
    let sv = mesh.strain_qp(&next.v);
    let nq = mesh.quad_count();
    let mut cond = Vec::with_capacity(nq);
    let mut visc = Vec::with_capacity(nq);
    for k in 0..nq {
        cond.push(tau * kq[k] * (gw[k][0] * gt[k][0] + gw[k][1] * gt[k][1]));
        visc.push(tau * co.viscosity.value(chi[k]) * co.mu * co.stiffness.contract(&sv[k], &sv[k]));
    }
    let damage_rate = problem
        .lumped_masses()
        .iter()
        .zip(next.chi.iter().zip(&prev.chi))
        .map(|(m, (a, b))| m * (a - b) * (a - b) / tau)
        .sum();
    Dissipation {
        conduction: mesh.integrate(&cond),
        damage_rate,
        viscous: mesh.integrate(&visc),
    }
}
