//! Superlevel statistics, the singular test-function estimate and the
//! a priori norm table.

use serde::{Deserialize, Serialize};

use crate::constitutive::{growth_ratio_sup, truncate, validate_exponents};
use crate::discretization::FieldState;
use crate::error::{Error, Result};
use crate::stepper::Problem;

/// Measures of `{w ≤ M}` and `{w > M}` and the bound quantity `M²|{w > M}|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Superlevel {
    pub below: f64,
    pub above: f64,
    pub bound: f64,
}

/// Quadrature measure of the sub- and strict superlevel sets of `w` at `m`.
pub fn superlevel_stats(problem: &Problem, w: &[f64], m: f64) -> Superlevel {
    let mesh = &problem.mesh;
    let wq = mesh.interpolate_qp(w);
    let above_ind: Vec<f64> = wq.iter().map(|v| if *v > m { 1.0 } else { 0.0 }).collect();
    let below_ind: Vec<f64> = above_ind.iter().map(|a| 1.0 - a).collect();
    let above = mesh.integrate(&above_ind);
    Superlevel {
        below: mesh.integrate(&below_ind),
        above,
        bound: m * m * above,
    }
}

/// Both sides of the estimate obtained by testing the heat equation with
/// `1 − 1/(T_M(w)+1)^α`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SingularEstimate {
    pub alpha: f64,
    /// `Σ τ∫K_M(w^k)/(T_M(w^k)+1)^{α+1}|∇T_M(w^k)|²`
    pub lhs: f64,
    /// `C‖D_τχ + ρ div D_τu + ρ' div u D_τχ‖_{L¹(L¹)} + ‖w^N‖_{L¹} + ‖w^0‖_{L¹} + ‖g‖_{L¹(L¹)}`
    pub rhs: f64,
    /// `c₀ sup_y (y^{1/σ}+1)/(y+1)^α`
    pub constant: f64,
    /// Largest observed `Θ_M(w)/(T_M(w)+1)^α` over nodes and times.
    pub max_ratio: f64,
    /// `α·lhs ≤ rhs(1 + tol)` and `max_ratio ≤ constant(1 + tol)`.
    pub holds: bool,
}

/// Evaluates the singular test-function estimate on a trajectory.
///
/// The estimate is derived for non-negative enthalpy; negative nodal
/// values within rounding are clamped to zero before `T_M` is applied.
pub fn singular_test_estimate(
    problem: &Problem,
    states: &[FieldState],
    alpha: f64,
    tol: f64,
) -> Result<SingularEstimate> {
    let co = &problem.model.coeffs;
    let verdict = validate_exponents(co.sigma, co.q, co.q0);
    if !verdict.admissible {
        return Err(Error::domain(format!(
            "exponents rejected: {}",
            verdict.violation.unwrap_or_default()
        )));
    }
    if !(alpha >= 1.0 / co.sigma && alpha <= 2.0 * co.q - 1.0) {
        return Err(Error::domain(format!(
            "α = {alpha} outside [1/σ, 2q − 1] = [{}, {}]",
            1.0 / co.sigma,
            2.0 * co.q - 1.0
        )));
    }
    let constant = growth_ratio_sup(co.c0, co.sigma, alpha)?;
    let mesh = &problem.mesh;
    let en = &problem.model.enthalpy;
    let m = en.truncation();
    let clamp = |w: f64| truncate(w.max(0.0), m);

    let l1 = |vals: &[f64]| mesh.integrate(&vals.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let g_total = mesh.integrate(&problem.sources.heat.at_quadrature(mesh));
    let mut lhs = 0.0;
    let mut coupling_l1 = 0.0;
    let mut source_l1 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for s in states {
        for w in &s.w {
            let tm = clamp(*w)?;
            max_ratio = max_ratio.max(en.theta_m_value(*w).max(0.0) / (tm + 1.0).powf(alpha));
        }
    }
    for pair in states.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let tau = next.t - prev.t;
        let tm: Vec<f64> = next.w.iter().map(|w| clamp(*w)).collect::<Result<_>>()?;
        let tq = mesh.interpolate_qp(&tm);
        let kq: Vec<f64> = mesh.interpolate_qp(&next.w).iter().map(|w| en.k_m(*w)).collect();
        let grad = mesh.gradient_qp(&tm);
        let dens: Vec<f64> = (0..mesh.quad_count())
            .map(|k| {
                let g2 = grad[k][0] * grad[k][0] + grad[k][1] * grad[k][1];
                tau * kq[k] / (tq[k].max(0.0) + 1.0).powf(alpha + 1.0) * g2
            })
            .collect();
        lhs += mesh.integrate(&dens);

        let chi_p = mesh.interpolate_qp(&prev.chi);
        let dchi: Vec<f64> = mesh
            .interpolate_qp(&next.chi)
            .iter()
            .zip(&chi_p)
            .map(|(a, b)| (a - b) / tau)
            .collect();
        let div_p = mesh.divergence_qp(&prev.u);
        let div_k = mesh.divergence_qp(&next.u);
        let src: Vec<f64> = (0..mesh.quad_count())
            .map(|k| {
                let rho = co.thermal_expansion.value(chi_p[k]);
                let drho = co.thermal_expansion.derivative(chi_p[k]);
                tau * (dchi[k] + rho * (div_k[k] - div_p[k]) / tau + drho * div_p[k] * dchi[k])
            })
            .collect();
        coupling_l1 += l1(&src);
        source_l1 += tau * g_total.abs();
    }
    let (first, last) = match (states.first(), states.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::domain("singular estimate needs at least one state")),
    };
    let rhs =
        constant * coupling_l1 + source_l1 + l1(&mesh.interpolate_qp(&last.w)) + l1(&mesh.interpolate_qp(&first.w));
    Ok(SingularEstimate {
        alpha,
        lhs,
        rhs,
        constant,
        max_ratio,
        holds: alpha * lhs <= rhs * (1.0 + tol) && max_ratio <= constant * (1.0 + tol),
    })
}

/// Computable a priori norms of a trajectory. Time integrals and suprema
/// run over the stored states, each weighted by the step that produced it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub u_h1_h1: f64,
    pub u_linf_h1: f64,
    pub v_linf_l2: f64,
    pub v_linf_h1: f64,
    pub w_linf_l1: f64,
    pub w_linf_l2: f64,
    pub w_l2_h1: f64,
    pub chi_linf_w1p: f64,
    pub chi_h1_l2: f64,
    pub grad_theta_l2_l2: f64,
    pub truncated_w_l2_h1: f64,
    /// `‖K̂_M(w)‖` in `L^r(L^{(6q+6)/(2q₀+1)})`.
    pub k_hat_m: f64,
    /// `‖Θ_M(w)‖` in `L^{2r/(2−r)}(L^{(6q+6)/(2q₀+1)})`.
    pub theta_m: f64,
}

impl NormTable {
    pub fn entries(&self) -> [(&'static str, f64); 13] {
        [
            ("u_h1_h1", self.u_h1_h1),
            ("u_linf_h1", self.u_linf_h1),
            ("v_linf_l2", self.v_linf_l2),
            ("v_linf_h1", self.v_linf_h1),
            ("w_linf_l1", self.w_linf_l1),
            ("w_linf_l2", self.w_linf_l2),
            ("w_l2_h1", self.w_l2_h1),
            ("chi_linf_w1p", self.chi_linf_w1p),
            ("chi_h1_l2", self.chi_h1_l2),
            ("grad_theta_l2_l2", self.grad_theta_l2_l2),
            ("truncated_w_l2_h1", self.truncated_w_l2_h1),
            ("k_hat_m", self.k_hat_m),
            ("theta_m", self.theta_m),
        ]
    }

    /// Largest relative spread `(max − min)/max` of each entry across
    /// tables, over all entries.
    pub fn max_relative_spread(tables: &[NormTable]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..13 {
            let vals: Vec<f64> = tables.iter().map(|t| t.entries()[j].1).collect();
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            if hi > 0.0 {
                worst = worst.max((hi - lo) / hi);
            }
        }
        worst
    }
}

struct Quad<'a> {
    pr: &'a Problem,
}

impl Quad<'_> {
    fn lp(&self, vals: &[f64], p: f64) -> f64 {
        let m = &self.pr.mesh;
        m.integrate(&vals.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>())
            .powf(1.0 / p)
    }

    fn l2_sq(&self, vals: &[f64]) -> f64 {
        self.pr.mesh.integrate(&vals.iter().map(|v| v * v).collect::<Vec<_>>())
    }

    fn grad_sq(&self, g: &[[f64; 2]]) -> f64 {
        self.pr
            .mesh
            .integrate(&g.iter().map(|g| g[0] * g[0] + g[1] * g[1]).collect::<Vec<_>>())
    }

    fn scalar_h1_sq(&self, f: &[f64]) -> f64 {
        let m = &self.pr.mesh;
        self.l2_sq(&m.interpolate_qp(f)) + self.grad_sq(&m.gradient_qp(f))
    }

    /// `‖z‖²_{H¹}` of a vector field with components interleaved per node.
    fn vector_h1_sq(&self, z: &[f64]) -> f64 {
        let d = self.pr.mesh.dim();
        (0..d)
            .map(|c| {
                let comp: Vec<f64> = z.iter().skip(c).step_by(d).cloned().collect();
                self.scalar_h1_sq(&comp)
            })
            .sum()
    }

    fn vector_l2_sq(&self, z: &[f64]) -> f64 {
        let d = self.pr.mesh.dim();
        (0..d)
            .map(|c| {
                let comp: Vec<f64> = z.iter().skip(c).step_by(d).cloned().collect();
                self.l2_sq(&self.pr.mesh.interpolate_qp(&comp))
            })
            .sum()
    }
}

/// Tabulates the a priori norms over `states`.
pub fn norm_table(problem: &Problem, states: &[FieldState]) -> Result<NormTable> {
    let co = &problem.model.coeffs;
    let verdict = validate_exponents(co.sigma, co.q, co.q0);
    let r = verdict
        .r
        .ok_or_else(|| Error::domain("norm table needs admissible exponents"))?;
    let space = (6.0 * co.q + 6.0) / (2.0 * co.q0 + 1.0);
    let theta_time = 2.0 * r / (2.0 - r);
    let q = Quad { pr: problem };
    let mesh = &problem.mesh;
    let en = &problem.model.enthalpy;
    let m = en.truncation();
    let p = co.p;
    let mut t = NormTable::default();
    let (mut u_h1_time, mut w_h1, mut chi_rate, mut gtheta, mut tw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut khat_acc, mut theta_acc) = (0.0, 0.0);
    for (k, s) in states.iter().enumerate() {
        t.u_linf_h1 = t.u_linf_h1.max(q.vector_h1_sq(&s.u).sqrt());
        t.v_linf_l2 = t.v_linf_l2.max(q.vector_l2_sq(&s.v).sqrt());
        t.v_linf_h1 = t.v_linf_h1.max(q.vector_h1_sq(&s.v).sqrt());
        let wq = mesh.interpolate_qp(&s.w);
        t.w_linf_l1 = t.w_linf_l1.max(q.lp(&wq, 1.0));
        t.w_linf_l2 = t.w_linf_l2.max(q.lp(&wq, 2.0));
        let chi_q = mesh.interpolate_qp(&s.chi);
        let gchi: Vec<f64> = mesh
            .gradient_qp(&s.chi)
            .iter()
            .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
            .collect();
        t.chi_linf_w1p = t.chi_linf_w1p.max(q.lp(&chi_q, p) + q.lp(&gchi, p));
        if k == 0 {
            continue;
        }
        let prev = &states[k - 1];
        let tau = s.t - prev.t;
        let du: Vec<f64> = s.u.iter().zip(&prev.u).map(|(a, b)| (a - b) / tau).collect();
        u_h1_time += tau * (q.vector_h1_sq(&s.u) + q.vector_h1_sq(&du));
        w_h1 += tau * q.scalar_h1_sq(&s.w);
        let dchi: Vec<f64> = s.chi.iter().zip(&prev.chi).map(|(a, b)| (a - b) / tau).collect();
        chi_rate += tau * (q.l2_sq(&chi_q) + q.l2_sq(&mesh.interpolate_qp(&dchi)));
        gtheta += tau * q.grad_sq(&mesh.gradient_qp(&problem.theta_nodes(&s.w)));
        let tm: Vec<f64> = s.w.iter().map(|w| truncate(*w, m)).collect::<Result<_>>()?;
        tw += tau * q.scalar_h1_sq(&tm);
        let kh: Vec<f64> = wq.iter().map(|w| en.k_hat_m(w.max(0.0))).collect::<Result<_>>()?;
        khat_acc += tau * q.lp(&kh, space).powf(r);
        let th: Vec<f64> = wq.iter().map(|w| en.theta_m_value(*w)).collect();
        theta_acc += tau * q.lp(&th, space).powf(theta_time);
    }
    t.u_h1_h1 = u_h1_time.sqrt();
    t.w_l2_h1 = w_h1.sqrt();
    t.chi_h1_l2 = chi_rate.sqrt();
    t.grad_theta_l2_l2 = gtheta.sqrt();
    t.truncated_w_l2_h1 = tw.sqrt();
    t.k_hat_m = khat_acc.powf(1.0 / r);
    t.theta_m = theta_acc.powf(1.0 / theta_time);
    Ok(t)
}
