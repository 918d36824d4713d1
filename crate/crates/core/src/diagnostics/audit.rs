//! Offline audit of consecutive stored states.
//!
//! Every quantity is recomputed from the two states with pointwise
//! quadrature formulas; nothing from the solver is reused except the
//! stored multiplier `ξ`.

use serde::{Deserialize, Serialize};

use crate::discretization::{
    assemble_elasticity, assemble_weighted_stiffness, integrate_against_divergence, integrate_against_shape, FieldState,
};
use crate::error::{Error, Result};
use crate::stepper::{EnergyLedger, Problem, Remainders};

/// Nodes with `χ ≤ ZERO_THRESHOLD` count as fully damaged.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Quadrature values shared by the pair formulas.
struct PairFields {
    tau: f64,
    chi_k: Vec<f64>,
    chi_p: Vec<f64>,
    dchi: Vec<f64>,
    energy_p: Vec<f64>,
    div_p: Vec<f64>,
    div_k: Vec<f64>,
    theta_p: Vec<f64>,
    theta_k: Vec<f64>,
}

impl PairFields {
    fn new(pr: &Problem, prev: &FieldState, next: &FieldState) -> Self {
        let mesh = &pr.mesh;
        let dchi: Vec<f64> = next.chi.iter().zip(&prev.chi).map(|(a, b)| a - b).collect();
        let c = &pr.model.coeffs.stiffness;
        PairFields {
            tau: next.t - prev.t,
            chi_k: mesh.interpolate_qp(&next.chi),
            chi_p: mesh.interpolate_qp(&prev.chi),
            dchi: mesh.interpolate_qp(&dchi),
            energy_p: mesh.strain_qp(&prev.u).iter().map(|e| c.contract(e, e)).collect(),
            div_p: mesh.divergence_qp(&prev.u),
            div_k: mesh.divergence_qp(&next.u),
            theta_p: mesh.interpolate_qp(&pr.theta_nodes(&prev.w)),
            theta_k: mesh.interpolate_qp(&pr.theta_nodes(&next.w)),
        }
    }

    /// Damage reaction density `γ(χ^k) + ½(b₁'(χ^k)+b₂'(χ^{k−1}))E^{k−1} −
    /// Θ^{k−1} − ρ'(χ^{k−1})Θ^k div u^{k−1}` at quadrature point `k`.
    fn reaction(&self, pr: &Problem, k: usize) -> f64 {
        let co = &pr.model.coeffs;
        let split = &pr.model.split;
        co.gamma(self.chi_k[k])
            + 0.5 * (split.b1_prime(self.chi_k[k]) + split.b2_prime(self.chi_p[k])) * self.energy_p[k]
            - self.theta_p[k]
            - co.thermal_expansion.derivative(self.chi_p[k]) * self.theta_k[k] * self.div_p[k]
    }
}

/// Cross-coupling remainders from their defining integrals.
pub fn remainders(pr: &Problem, prev: &FieldState, next: &FieldState) -> Remainders {
    let f = PairFields::new(pr, prev, next);
    let co = &pr.model.coeffs;
    let split = &pr.model.split;
    let nq = pr.mesh.quad_count();
    let (mut r1, mut r2, mut r3, mut g) = (vec![0.0; nq], vec![0.0; nq], vec![0.0; nq], vec![0.0; nq]);
    for k in 0..nq {
        let rho = co.thermal_expansion.value(f.chi_p[k]);
        let drho = co.thermal_expansion.derivative(f.chi_p[k]);
        let ddiv = f.div_k[k] - f.div_p[k];
        let bp = split.b1_prime(f.chi_k[k]) + split.b2_prime(f.chi_p[k]);
        r1[k] = -0.5 * bp * f.energy_p[k] * f.dchi[k] - rho * f.theta_k[k] * ddiv;
        r2[k] = f.reaction(pr, k) * f.dchi[k];
        r3[k] = f.theta_p[k] * f.dchi[k] + rho * f.theta_k[k] * ddiv + drho * f.theta_k[k] * f.div_p[k] * f.dchi[k];
        g[k] = co.gamma(f.chi_k[k]) * f.dchi[k];
    }
    let m = &pr.mesh;
    Remainders {
        r1: m.integrate(&r1),
        r2: m.integrate(&r2),
        r3: m.integrate(&r3),
        gamma_work: m.integrate(&g),
    }
}

fn energy_level(pr: &Problem, s: &FieldState) -> [f64; 4] {
    let mesh = &pr.mesh;
    let co = &pr.model.coeffs;
    let c = &co.stiffness;
    let chi = mesh.interpolate_qp(&s.chi);
    let el: Vec<f64> = mesh
        .strain_qp(&s.u)
        .iter()
        .zip(&chi)
        .map(|(e, x)| 0.5 * co.elasticity.value(*x) * c.contract(e, e))
        .collect();
    let w_abs: Vec<f64> = mesh.interpolate_qp(&s.w).iter().map(|w| w.abs()).collect();
    [
        0.5 * pr.vector_mass().bilinear(&s.v, &s.v),
        mesh.integrate(&el),
        pr.plap.energy(mesh, &s.chi),
        mesh.integrate(&w_abs),
    ]
}

/// The per-step energy ledger from its defining integrals.
pub fn energy_ledger(pr: &Problem, prev: &FieldState, next: &FieldState) -> EnergyLedger {
    let mesh = &pr.mesh;
    let co = &pr.model.coeffs;
    let tau = next.t - prev.t;
    let [k0, e0, g0, h0] = energy_level(pr, prev);
    let [k1, e1, g1, _] = energy_level(pr, next);
    let chi = mesh.interpolate_qp(&next.chi);
    let visc: Vec<f64> = mesh
        .strain_qp(&next.v)
        .iter()
        .zip(&chi)
        .map(|(e, x)| tau * co.viscosity.value(*x) * co.mu * co.stiffness.contract(e, e))
        .collect();
    let damage_rate: f64 = pr
        .lumped_masses()
        .iter()
        .zip(next.chi.iter().zip(&prev.chi))
        .map(|(m, (a, b))| m * (a - b) * (a - b) / tau)
        .sum();
    let dw: Vec<f64> = next.w.iter().zip(&prev.w).map(|(a, b)| a - b).collect();
    let du: Vec<f64> = next.u.iter().zip(&prev.u).map(|(a, b)| a - b).collect();
    let g_qp = pr.sources.heat.at_quadrature(mesh);
    let rem = remainders(pr, prev, next);
    EnergyLedger {
        kinetic: k1 - k0,
        elastic: e1 - e0,
        viscous: mesh.integrate(&visc),
        damage_rate,
        gradient: g1 - g0,
        enthalpy: mesh.integrate(&mesh.interpolate_qp(&dw)),
        source_work: tau * mesh.integrate(&g_qp) + pr.load_work(&du),
        potential_work: -rem.gamma_work,
        level: k0 + e0 + g0 + h0,
    }
}

/// Residual norms of the discrete weak formulation on one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeakResiduals {
    /// Heat equation tested with each nodal basis function, relative.
    pub heat: f64,
    /// Momentum balance at free dofs, relative.
    pub momentum: f64,
    /// `max (F_i/m_i + ξ_i)⁺`: violation of the one-sided inequality over
    /// the non-positive nodal test directions, relative.
    pub one_sided: f64,
    /// `|F_i/m_i + ξ_i|` where `χ^k_i < χ^{k−1}_i`, relative.
    pub damage_equality: f64,
    /// `max(ξ⁺, |∫ξχ|)`: violation of `∫ξ(ζ − χ) ≤ 0` for `ζ ≥ 0`.
    pub xi_sign: f64,
}

impl WeakResiduals {
    pub fn max(&self) -> f64 {
        self.heat
            .max(self.momentum)
            .max(self.one_sided)
            .max(self.damage_equality)
            .max(self.xi_sign)
    }
}

/// Consistency of the stored multiplier with the subgradient formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct XiCheck {
    /// Nodes with `χ^k ≤ 10⁻¹²`.
    pub active_nodes: usize,
    /// Active nodes whose whole patch is zero at both time levels.
    pub interior_nodes: usize,
    /// `max |ξ − ξ_ref|` over active nodes, `ξ_ref = −(F_i/m_i)⁺` from the
    /// full nodal residual.
    pub discrepancy: f64,
    /// `max |ξ − ξ_formula|` over interior nodes, with `ξ_formula` the
    /// tested `−(γ(0) + b'(0)/2 Cε:ε − Θ_M(w) − ρ'(0)Θ_M(w) div u)⁺`.
    pub formula_discrepancy: f64,
    /// `max |ξ|` off the active set.
    pub off_active: f64,
}

impl XiCheck {
    pub fn max(&self) -> f64 {
        self.discrepancy.max(self.formula_discrepancy).max(self.off_active)
    }
}

/// Nodal damage residual `F_i` (with the lumped time derivative) and the
/// tested reaction alone, both divided by `m_i`.
fn damage_residual(pr: &Problem, f: &PairFields, prev: &FieldState, next: &FieldState) -> (Vec<f64>, Vec<f64>) {
    let mesh = &pr.mesh;
    let vals: Vec<f64> = (0..mesh.quad_count()).map(|k| f.reaction(pr, k)).collect();
    let reaction = integrate_against_shape(mesh, &vals);
    let plap = pr.plap.residual(mesh, &next.chi);
    let m = pr.lumped_masses();
    let full = (0..m.len())
        .map(|i| (m[i] * (next.chi[i] - prev.chi[i]) / f.tau + plap[i] + reaction[i]) / m[i])
        .collect();
    let react = reaction.iter().zip(m).map(|(r, m)| r / m).collect();
    (full, react)
}

fn patches(pr: &Problem) -> Vec<Vec<usize>> {
    let mesh = &pr.mesh;
    let mut out = vec![Vec::new(); mesh.node_count()];
    for e in 0..mesh.element_count() {
        for &a in mesh.element(e) {
            for &b in mesh.element(e) {
                if !out[a].contains(&b) {
                    out[a].push(b);
                }
            }
        }
    }
    out
}

/// Compares the stored multiplier `xi` (density units, lower bound only)
/// with its closed form on the fully damaged set.
pub fn xi_formula_check(pr: &Problem, prev: &FieldState, next: &FieldState, xi: &[f64]) -> XiCheck {
    let f = PairFields::new(pr, prev, next);
    let (full, _) = damage_residual(pr, &f, prev, next);
    let co = &pr.model.coeffs;
    let db0 = co.elasticity.derivative(0.0);
    let drho0 = co.thermal_expansion.derivative(0.0);
    let g0 = co.gamma(0.0);
    let vals: Vec<f64> = (0..pr.mesh.quad_count())
        .map(|k| g0 + 0.5 * db0 * f.energy_p[k] - f.theta_p[k] - drho0 * f.theta_k[k] * f.div_p[k])
        .collect();
    let formula = integrate_against_shape(&pr.mesh, &vals);
    let zero = |c: f64| c <= ZERO_THRESHOLD;
    let patch = patches(pr);
    let m = pr.lumped_masses();
    let mut out = XiCheck::default();
    for i in 0..xi.len() {
        if zero(next.chi[i]) {
            out.active_nodes += 1;
            let reference = -full[i].max(0.0);
            out.discrepancy = out.discrepancy.max((xi[i] - reference).abs());
            if patch[i].iter().all(|&j| zero(next.chi[j]) && zero(prev.chi[j])) {
                out.interior_nodes += 1;
                let closed = -(formula[i] / m[i]).max(0.0);
                out.formula_discrepancy = out.formula_discrepancy.max((xi[i] - closed).abs());
            }
        } else {
            out.off_active = out.off_active.max(xi[i].abs());
        }
    }
    out
}

/// Derives the lower-bound multiplier from the stored states when no
/// solver multiplier was persisted.
pub fn derived_xi(pr: &Problem, prev: &FieldState, next: &FieldState) -> Vec<f64> {
    let f = PairFields::new(pr, prev, next);
    let (full, _) = damage_residual(pr, &f, prev, next);
    full.iter()
        .zip(&next.chi)
        .map(|(r, c)| if *c <= ZERO_THRESHOLD { -r.max(0.0) } else { 0.0 })
        .collect()
}

/// Validates a one-sided test direction and returns `Σ r_i ζ_i`, which must
/// be non-negative for the one-sided inequality to hold.
pub fn one_sided_test(residual: &[f64], zeta: &[f64]) -> Result<f64> {
    if let Some(i) = zeta.iter().position(|z| *z > 0.0) {
        return Err(Error::domain(format!(
            "one-sided test directions must be non-positive; ζ_{i} = {}",
            zeta[i]
        )));
    }
    Ok(residual.iter().zip(zeta).map(|(r, z)| r * z).sum())
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn weak_residuals(pr: &Problem, prev: &FieldState, next: &FieldState, xi: &[f64]) -> Result<WeakResiduals> {
    let mesh = &pr.mesh;
    let co = &pr.model.coeffs;
    let f = PairFields::new(pr, prev, next);
    let tau = f.tau;
    let m = pr.lumped_masses();
    let nq = mesh.quad_count();

    // heat, with the nodal coupling Θ_M(w_i)·∫(…)φ_i used by the scheme
    let kq: Vec<f64> = mesh
        .interpolate_qp(&prev.w)
        .iter()
        .map(|w| pr.model.enthalpy.k_m(*w))
        .collect();
    let aw = assemble_weighted_stiffness(mesh, &kq)?.mul_vec(&next.w);
    let mut s_vals = vec![0.0; nq];
    let mut c_vals = vec![0.0; nq];
    for k in 0..nq {
        let rho = co.thermal_expansion.value(f.chi_p[k]);
        let drho = co.thermal_expansion.derivative(f.chi_p[k]);
        s_vals[k] = f.theta_p[k] * f.dchi[k] / tau;
        c_vals[k] = (rho * (f.div_k[k] - f.div_p[k]) + drho * f.div_p[k] * f.dchi[k]) / tau;
    }
    let s = integrate_against_shape(mesh, &s_vals);
    let c = integrate_against_shape(mesh, &c_vals);
    let g = integrate_against_shape(mesh, &pr.sources.heat.at_quadrature(mesh));
    let theta_k = pr.theta_nodes(&next.w);
    // a unit nodal source is the smallest scale either residual is measured against
    let unit = m.iter().fold(0.0f64, |a, b| a.max(*b));
    let mut heat_r: f64 = 0.0;
    let mut heat_scale = unit;
    for i in 0..m.len() {
        let dt = m[i] * (next.w[i] - prev.w[i]) / tau;
        heat_r = heat_r.max((dt + aw[i] + s[i] + c[i] * theta_k[i] - g[i]).abs());
        heat_scale = heat_scale
            .max(m[i] * next.w[i].abs() / tau)
            .max(m[i] * prev.w[i].abs() / tau)
            .max(aw[i].abs())
            .max(g[i].abs());
    }

    // momentum
    let chi_k = &f.chi_k;
    let b: Vec<f64> = chi_k.iter().map(|x| co.elasticity.value(*x)).collect();
    let a: Vec<f64> = chi_k.iter().map(|x| co.viscosity.value(*x) * co.mu).collect();
    let kb = assemble_elasticity(mesh, &b, &co.stiffness)?.mul_vec(&next.u);
    let ka = assemble_elasticity(mesh, &a, &co.stiffness)?.mul_vec(&next.v);
    let accel: Vec<f64> = next.v.iter().zip(&prev.v).map(|(x, y)| (x - y) / tau).collect();
    let ma = pr.vector_mass().mul_vec(&accel);
    let t_vals: Vec<f64> = (0..nq)
        .map(|k| co.thermal_expansion.value(f.chi_p[k]) * f.theta_k[k])
        .collect();
    let t = integrate_against_divergence(mesh, &t_vals);
    let d = mesh.dim();
    let mut l_qp = vec![0.0; nq * d];
    for (comp, prof) in pr.sources.load.iter().enumerate() {
        for (k, v) in prof.at_quadrature(mesh).into_iter().enumerate() {
            l_qp[k * d + comp] = v;
        }
    }
    let l = crate::discretization::integrate_vector_load(mesh, &l_qp);
    let fixed = mesh.vector_boundary();
    let mut mom_r: f64 = 0.0;
    let mut mom_scale = unit;
    for j in 0..fixed.len() {
        if fixed[j] {
            continue;
        }
        mom_r = mom_r.max((ma[j] + kb[j] + ka[j] - t[j] - l[j]).abs());
        mom_scale = mom_scale
            .max(ma[j].abs())
            .max(kb[j].abs())
            .max(ka[j].abs())
            .max(t[j].abs())
            .max(l[j].abs());
    }

    // damage inclusion
    let (full, react) = damage_residual(pr, &f, prev, next);
    let rate: Vec<f64> = next.chi.iter().zip(&prev.chi).map(|(a, b)| (a - b) / tau).collect();
    let dscale = 1f64.max(inf_norm(&rate)).max(inf_norm(&react));
    let mut one_sided: f64 = 0.0;
    let mut equality: f64 = 0.0;
    for i in 0..full.len() {
        let r = full[i] + xi[i];
        one_sided = one_sided.max(r);
        if next.chi[i] < prev.chi[i] {
            equality = equality.max(r.abs());
        }
    }
    let xi_pos = xi.iter().fold(0.0f64, |acc, x| acc.max(*x));
    let xi_chi: f64 = (0..xi.len()).map(|i| m[i] * xi[i] * next.chi[i]).sum();

    Ok(WeakResiduals {
        heat: heat_r / heat_scale,
        momentum: mom_r / mom_scale,
        one_sided: one_sided / dscale,
        damage_equality: equality / dscale,
        xi_sign: xi_pos.max(xi_chi.abs()) / dscale,
    })
}

/// `τ‖D_τχ‖² + E_p(χ^k) − E_p(χ^{k−1}) + R₂` from its integrals, and the
/// magnitude used to scale it.
pub fn damage_balance(pr: &Problem, prev: &FieldState, next: &FieldState) -> (f64, f64) {
    let rem = remainders(pr, prev, next);
    let tau = next.t - prev.t;
    let rate: f64 = pr
        .lumped_masses()
        .iter()
        .zip(next.chi.iter().zip(&prev.chi))
        .map(|(m, (a, b))| m * (a - b) * (a - b) / tau)
        .sum();
    let e0 = pr.plap.energy(&pr.mesh, &prev.chi);
    let de = pr.plap.energy(&pr.mesh, &next.chi) - e0;
    (rate + de + rem.r2, rate + de.abs() + rem.r2.abs())
}

/// Largest windowed slack of the partial energy inequality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowAudit {
    pub max_slack: f64,
    /// Grid indices `(s, t)` attaining it; equal when every window is
    /// non-positive.
    pub window: (usize, usize),
    pub scale: f64,
}

/// Windowed sums `Σ_{s<k≤t} balance_k` over all grid pairs `s ≤ t`, with
/// the time integrals taken with the scheme's placements.
pub fn partial_energy_inequality(balances: &[f64], magnitudes: &[f64], level: f64) -> WindowAudit {
    let mut best = WindowAudit {
        max_slack: 0.0,
        window: (0, 0),
        scale: level.abs() + magnitudes.iter().map(|m| m.abs()).sum::<f64>(),
    };
    let mut prefix = 0.0;
    let (mut min_prefix, mut argmin) = (0.0, 0);
    for (k, b) in balances.iter().enumerate() {
        prefix += b;
        if prefix - min_prefix > best.max_slack {
            best.max_slack = prefix - min_prefix;
            best.window = (argmin, k + 1);
        }
        if prefix < min_prefix {
            min_prefix = prefix;
            argmin = k + 1;
        }
    }
    best
}
