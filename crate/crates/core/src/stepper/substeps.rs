//! The three decoupled subproblems of one time step.
//!
//! Every coefficient is evaluated at the shared quadrature points and
//! temperatures enter through the nodal interpolant of `Θ_M`, so that the
//! tested forms of the three equations are built from identical values.

use crate::discretization::assembly::scalar_form;
use crate::discretization::{
    assemble_elasticity, assemble_weighted_stiffness, integrate_against_divergence, integrate_against_shape, FieldState,
};
use crate::error::{Error, Result};
use crate::solver::cholesky::relative_residual;
use crate::solver::{solve_obstacle, solve_spd, CsrMatrix, ObstacleOperator, ObstacleProblem, ObstacleSolution};
use crate::stepper::problem::{Problem, StepControls};

/// Quantities of the previous time level, evaluated once per step.
pub(crate) struct StepContext<'a> {
    pub problem: &'a Problem,
    pub prev: &'a FieldState,
    pub tau: f64,
    pub chi_prev_qp: Vec<f64>,
    /// `Cε(u^{k−1}):ε(u^{k−1})`
    pub energy_prev_qp: Vec<f64>,
    pub div_prev_qp: Vec<f64>,
    /// Interpolated `Θ_M(w^{k−1})`.
    pub theta_prev_qp: Vec<f64>,
    pub rho_prev_qp: Vec<f64>,
    pub drho_prev_qp: Vec<f64>,
    pub b2p_prev_qp: Vec<f64>,
    /// `K_M(w^{k−1})`
    pub conductivity_qp: Vec<f64>,
}

impl<'a> StepContext<'a> {
    pub fn new(problem: &'a Problem, prev: &'a FieldState, tau: f64) -> Self {
        let mesh = &problem.mesh;
        let co = &problem.model.coeffs;
        let chi_prev_qp = mesh.interpolate_qp(&prev.chi);
        let theta_prev = problem.theta_nodes(&prev.w);
        let enthalpy = &problem.model.enthalpy;
        StepContext {
            energy_prev_qp: problem.strain_energy_density(&prev.u),
            div_prev_qp: mesh.divergence_qp(&prev.u),
            theta_prev_qp: mesh.interpolate_qp(&theta_prev),
            rho_prev_qp: chi_prev_qp.iter().map(|c| co.thermal_expansion.value(*c)).collect(),
            drho_prev_qp: chi_prev_qp
                .iter()
                .map(|c| co.thermal_expansion.derivative(*c))
                .collect(),
            b2p_prev_qp: chi_prev_qp.iter().map(|c| problem.model.split.b2_prime(*c)).collect(),
            conductivity_qp: mesh.interpolate_qp(&prev.w).iter().map(|w| enthalpy.k_m(*w)).collect(),
            chi_prev_qp,
            problem,
            prev,
            tau,
        }
    }
}

/// Damage residual `F(χ)` with the lumped time derivative, the
/// p-Laplacian, the implicit `γ(χ)` and convex part `b₁'(χ)`, and the
/// explicit remainder collected in `f0`.
pub(crate) struct DamageOperator<'a> {
    ctx: &'a StepContext<'a>,
    f0: Vec<f64>,
}

impl<'a> DamageOperator<'a> {
    /// `theta_k_qp` is the interpolated `Θ_M(w^k)` of the current coupling
    /// iterate.
    pub fn new(ctx: &'a StepContext<'a>, theta_k_qp: &[f64]) -> Self {
        let pr = ctx.problem;
        let vals: Vec<f64> = (0..pr.mesh.quad_count())
            .map(|k| {
                0.5 * ctx.b2p_prev_qp[k] * ctx.energy_prev_qp[k]
                    - ctx.theta_prev_qp[k]
                    - ctx.drho_prev_qp[k] * theta_k_qp[k] * ctx.div_prev_qp[k]
            })
            .collect();
        DamageOperator {
            f0: integrate_against_shape(&pr.mesh, &vals),
            ctx,
        }
    }
}

impl DamageOperator<'_> {
    /// Everything except the time derivative and the p-Laplacian:
    /// `∫[γ(χ) + ½b₁'(χ)E^{k−1}]φ_i + f0_i`.
    pub fn reaction(&self, x: &[f64]) -> Vec<f64> {
        let pr = self.ctx.problem;
        let model = &pr.model;
        let e = &self.ctx.energy_prev_qp;
        let vals: Vec<f64> = pr
            .mesh
            .interpolate_qp(x)
            .iter()
            .enumerate()
            .map(|(k, c)| model.coeffs.gamma(*c) + 0.5 * model.split.b1_prime(*c) * e[k])
            .collect();
        let mut out = integrate_against_shape(&pr.mesh, &vals);
        for (o, f) in out.iter_mut().zip(&self.f0) {
            *o += f;
        }
        out
    }
}

impl ObstacleOperator for DamageOperator<'_> {
    fn len(&self) -> usize {
        self.f0.len()
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let pr = self.ctx.problem;
        let reaction = self.reaction(x);
        let diffusion = pr.plap.residual(&pr.mesh, x);
        let chi_prev = &self.ctx.prev.chi;
        (0..x.len())
            .map(|i| pr.lumped[i] * (x[i] - chi_prev[i]) / self.ctx.tau + diffusion[i] + reaction[i])
            .collect()
    }

    fn residual_magnitude(&self, x: &[f64]) -> Vec<f64> {
        let pr = self.ctx.problem;
        let reaction = self.reaction(x);
        let diffusion = pr.plap.residual_magnitude(&pr.mesh, x);
        let chi_prev = &self.ctx.prev.chi;
        (0..x.len())
            .map(|i| {
                (pr.lumped[i] * (x[i] - chi_prev[i]) / self.ctx.tau).abs()
                    + diffusion[i]
                    + reaction[i].abs()
                    + self.f0[i].abs()
            })
            .collect()
    }

    fn jacobian(&self, x: &[f64]) -> CsrMatrix {
        let pr = self.ctx.problem;
        let model = &pr.model;
        let mesh = &pr.mesh;
        let nq = mesh.quad_points_per_element();
        let e = &self.ctx.energy_prev_qp;
        let slope: Vec<f64> = mesh
            .interpolate_qp(x)
            .iter()
            .enumerate()
            .map(|(k, c)| model.coeffs.gamma_prime(*c) + 0.5 * model.split.b1_second(*c) * e[k])
            .collect();
        let reaction = scalar_form(mesh, |el, q, a, b| {
            let s = mesh.shape(el, q);
            slope[el * nq + q] * s[a] * s[b]
        });
        let mass: Vec<f64> = pr.lumped.iter().map(|m| m / self.ctx.tau).collect();
        CsrMatrix::linear_combination(&[
            (1.0, &CsrMatrix::diagonal(&mass)),
            (1.0, &pr.plap.jacobian(mesh, x)),
            (1.0, &reaction),
        ])
    }

    fn merit(&self, x: &[f64]) -> f64 {
        let pr = self.ctx.problem;
        let model = &pr.model;
        let e = &self.ctx.energy_prev_qp;
        let chi_prev = &self.ctx.prev.chi;
        let density: Vec<f64> = pr
            .mesh
            .interpolate_qp(x)
            .iter()
            .enumerate()
            .map(|(k, c)| model.coeffs.gamma_hat(*c) + 0.5 * model.split.b1(*c) * e[k])
            .collect();
        let nodal: f64 = (0..x.len())
            .map(|i| {
                let dx = x[i] - chi_prev[i];
                pr.lumped[i] * dx * dx / (2.0 * self.ctx.tau) + self.f0[i] * x[i]
            })
            .sum();
        nodal + pr.plap.energy(&pr.mesh, x) + pr.mesh.integrate(&density)
    }
}

/// Solves the damage inclusion with bounds `0 ≤ χ ≤ χ^{k−1}`.
pub(crate) fn damage_substep(
    ctx: &StepContext<'_>,
    controls: &StepControls,
    theta_k_qp: &[f64],
    guess: &[f64],
) -> Result<ObstacleSolution> {
    let op = DamageOperator::new(ctx, theta_k_qp);
    let n = guess.len();
    let prob = ObstacleProblem {
        operator: &op,
        lower: vec![0.0; n],
        upper: ctx.prev.chi.clone(),
        weights: ctx.problem.lumped.clone(),
        tolerance: controls.obstacle_tol,
        max_iterations: controls.obstacle_max_iterations,
    };
    Ok(solve_obstacle(&prob, guess)?)
}

/// `T_j = ∫ ρ(χ^{k−1}) Θ_M(w^k) div φ_j`
pub(crate) fn thermal_load(ctx: &StepContext<'_>, theta_k_qp: &[f64]) -> Vec<f64> {
    let vals: Vec<f64> = ctx.rho_prev_qp.iter().zip(theta_k_qp).map(|(r, t)| r * t).collect();
    integrate_against_divergence(&ctx.problem.mesh, &vals)
}

pub(crate) struct MomentumSolution {
    pub u: Vec<f64>,
    pub residual: f64,
}

/// Implicit Kelvin–Voigt momentum balance with `b(χ^k)`, `a(χ^k)` and
/// thermal forcing from `Θ_M(w^k)`.
pub(crate) fn momentum_substep(ctx: &StepContext<'_>, chi_k: &[f64], theta_k_qp: &[f64]) -> Result<MomentumSolution> {
    let pr = ctx.problem;
    let co = &pr.model.coeffs;
    let tau = ctx.tau;
    let chi_qp = pr.mesh.interpolate_qp(chi_k);
    let visc: Vec<f64> = chi_qp.iter().map(|c| co.viscosity.value(*c) * co.mu / tau).collect();
    let total: Vec<f64> = chi_qp
        .iter()
        .zip(&visc)
        .map(|(c, v)| co.elasticity.value(*c) + v)
        .collect();
    let k_total = assemble_elasticity(&pr.mesh, &total, &co.stiffness)?;
    let k_visc = assemble_elasticity(&pr.mesh, &visc, &co.stiffness)?;
    let m = &pr.vector_mass;
    let matrix = CsrMatrix::linear_combination(&[(1.0 / (tau * tau), m), (1.0, &k_total)]);
    let inertia: Vec<f64> = ctx
        .prev
        .u
        .iter()
        .zip(&ctx.prev.v)
        .map(|(u, v)| u / (tau * tau) + v / tau)
        .collect();
    let mut rhs = m.mul_vec(&inertia);
    let t = thermal_load(ctx, theta_k_qp);
    for (((r, kv), tj), lj) in rhs
        .iter_mut()
        .zip(k_visc.mul_vec(&ctx.prev.u))
        .zip(&t)
        .zip(&pr.mech_load)
    {
        *r += kv + tj + lj;
    }
    for (r, fixed) in rhs.iter_mut().zip(&pr.dirichlet) {
        if *fixed {
            *r = 0.0;
        }
    }
    let constrained = matrix.constrain(&pr.dirichlet);
    let u = solve_spd(&constrained, &rhs)?;
    Ok(MomentumSolution {
        residual: relative_residual(&constrained, &u, &rhs),
        u,
    })
}

/// Nodal coupling coefficients of the heat equation: `S_i = ∫Θ_M(w^{k−1})
/// D_τχ φ_i` and `c_i = ∫[ρ(χ^{k−1}) div D_τu + ρ'(χ^{k−1}) div(u^{k−1})
/// D_τχ] φ_i`, the latter multiplying the nodal `Θ_M(w^k_i)`.
pub(crate) fn heat_couplings(ctx: &StepContext<'_>, chi_k: &[f64], u_k: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pr = ctx.problem;
    let mesh = &pr.mesh;
    let tau = ctx.tau;
    let chi_qp = mesh.interpolate_qp(chi_k);
    let div_k = mesh.divergence_qp(u_k);
    let nq = mesh.quad_count();
    let mut s_vals = Vec::with_capacity(nq);
    let mut c_vals = Vec::with_capacity(nq);
    for k in 0..nq {
        let dchi = (chi_qp[k] - ctx.chi_prev_qp[k]) / tau;
        let ddiv = (div_k[k] - ctx.div_prev_qp[k]) / tau;
        s_vals.push(ctx.theta_prev_qp[k] * dchi);
        c_vals.push(ctx.rho_prev_qp[k] * ddiv + ctx.drho_prev_qp[k] * ctx.div_prev_qp[k] * dchi);
    }
    (
        integrate_against_shape(mesh, &s_vals),
        integrate_against_shape(mesh, &c_vals),
    )
}

pub(crate) struct HeatSolution {
    pub w: Vec<f64>,
    pub linear_residual: f64,
}

/// Linearly implicit heat step. Conductivity is lagged to `w^{k−1}`; the
/// coupling `c_i Θ_M(w_i)` is split by sign so that the matrix stays an
/// M-matrix and the right-hand side stays non-negative.
pub(crate) fn heat_substep(ctx: &StepContext<'_>, chi_k: &[f64], u_k: &[f64], w_iter: &[f64]) -> Result<HeatSolution> {
    let pr = ctx.problem;
    let tau = ctx.tau;
    let (s, c) = heat_couplings(ctx, chi_k, u_k);
    let theta_iter = pr.theta_nodes(w_iter);
    let stiffness = assemble_weighted_stiffness(&pr.mesh, &ctx.conductivity_qp)?;
    let n = w_iter.len();
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let m = pr.lumped[i];
        diag[i] = m / tau;
        if c[i] > 0.0 && w_iter[i] > 0.0 {
            diag[i] += c[i] * theta_iter[i] / w_iter[i];
        }
        rhs[i] = m * ctx.prev.w[i] / tau - s[i] + pr.heat_load[i];
        if c[i] < 0.0 {
            rhs[i] -= c[i] * theta_iter[i];
        }
    }
    if diag.iter().chain(&rhs).any(|v| !v.is_finite()) {
        return Err(Error::StepRejected("non-finite heat system".into()));
    }
    let matrix = CsrMatrix::linear_combination(&[(1.0, &CsrMatrix::diagonal(&diag)), (1.0, &stiffness)]);
    let w = solve_spd(&matrix, &rhs)?;
    Ok(HeatSolution {
        linear_residual: relative_residual(&matrix, &w, &rhs),
        w,
    })
}

/// `‖F(w)‖∞ / max(‖m w/τ‖∞, ‖g‖∞, tiny)` for the unsplit nonlinear heat
/// equation at final fields.
pub(crate) fn heat_equation_residual(ctx: &StepContext<'_>, chi_k: &[f64], u_k: &[f64], w: &[f64]) -> Result<f64> {
    let pr = ctx.problem;
    let (s, c) = heat_couplings(ctx, chi_k, u_k);
    let theta = pr.theta_nodes(w);
    let aw = assemble_weighted_stiffness(&pr.mesh, &ctx.conductivity_qp)?.mul_vec(w);
    let mut worst: f64 = 0.0;
    let mut scale = f64::MIN_POSITIVE;
    for i in 0..w.len() {
        let m = pr.lumped[i] / ctx.tau;
        let r = m * (w[i] - ctx.prev.w[i]) + aw[i] + s[i] + c[i] * theta[i] - pr.heat_load[i];
        worst = worst.max(r.abs());
        scale = scale
            .max((m * w[i]).abs())
            .max((m * ctx.prev.w[i]).abs())
            .max(pr.heat_load[i].abs());
    }
    Ok(worst / scale)
}
