//! Step controls and the assembled, time-independent parts of a problem.

use serde::{Deserialize, Serialize};

use crate::constitutive::Model;
use crate::discretization::{
    assemble_vector_mass, integrate_against_shape, integrate_vector_load, lumped_masses, FieldState, Mesh, PLaplacian,
    DEFAULT_EPS_P,
};
use crate::error::{Error, Result};
use crate::solver::CsrMatrix;
use crate::stepper::data::Sources;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControls {
    /// Initial (and maximal) time step.
    pub tau: f64,
    /// Relative update tolerance of the Gauss–Seidel coupling loop.
    pub fixed_point_tol: f64,
    pub max_outer_iterations: usize,
    /// Under-relaxation factor in `(0, 1]`.
    pub relaxation: f64,
    /// Runs abort once halving would push `τ` below this.
    pub min_tau: f64,
    /// Truncation level `M`; may be infinite.
    pub truncation: f64,
    pub eps_p: f64,
    /// KKT tolerance of the damage subproblem, in density units.
    pub obstacle_tol: f64,
    pub obstacle_max_iterations: usize,
}

impl Default for StepControls {
    fn default() -> Self {
        StepControls {
            tau: 1e-3,
            fixed_point_tol: 1e-10,
            max_outer_iterations: 50,
            relaxation: 1.0,
            min_tau: 1e-8,
            truncation: 1e6,
            eps_p: DEFAULT_EPS_P,
            obstacle_tol: 1e-11,
            obstacle_max_iterations: 200,
        }
    }
}

impl StepControls {
    /// Human-readable problems, empty when the controls are usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            out.push(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.fixed_point_tol > 0.0) {
            out.push(format!(
                "fixed_point_tol must be positive, got {}",
                self.fixed_point_tol
            ));
        }
        if self.max_outer_iterations == 0 {
            out.push("max_outer_iterations must be at least 1".into());
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            out.push(format!("relaxation must lie in (0, 1], got {}", self.relaxation));
        }
        if !(self.min_tau > 0.0 && self.min_tau <= self.tau) {
            out.push(format!("min_tau must lie in (0, tau], got {}", self.min_tau));
        }
        if !(self.truncation > 0.0) {
            out.push(format!("truncation must be positive, got {}", self.truncation));
        }
        if !(self.eps_p >= 0.0 && self.eps_p.is_finite()) {
            out.push(format!("eps_p must be non-negative, got {}", self.eps_p));
        }
        if !(self.obstacle_tol > 0.0) || self.obstacle_max_iterations == 0 {
            out.push("obstacle tolerance and iteration limit must be positive".into());
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(
                p.into_iter().map(|m| format!("(controls) {m}")).collect(),
            ))
        }
    }
}

/// Mesh, model and everything that does not change between steps.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: Mesh,
    pub model: Model,
    pub sources: Sources,
    pub plap: PLaplacian,
    pub(crate) lumped: Vec<f64>,
    pub(crate) vector_mass: CsrMatrix,
    pub(crate) dirichlet: Vec<bool>,
    /// `∫ g φ_i`
    pub(crate) heat_load: Vec<f64>,
    /// `∫ ℓ·φ_j`
    pub(crate) mech_load: Vec<f64>,
}

impl Problem {
    /// Applies the truncation level and `ε_p` from `controls` to `model`.
    pub fn new(mesh: Mesh, model: Model, sources: Sources, controls: &StepControls) -> Result<Self> {
        controls.check()?;
        let d = mesh.dim();
        if model.coeffs.dim != d || model.coeffs.stiffness.dim() != d {
            return Err(Error::Mesh(format!(
                "model of dimension {} on a mesh of dimension {d}",
                model.coeffs.dim
            )));
        }
        sources.heat.check(d)?;
        if !(sources.load.is_empty() || sources.load.len() == d) {
            return Err(Error::domain(format!(
                "mechanical load needs {d} components, got {}",
                sources.load.len()
            )));
        }
        let model = if model.enthalpy.truncation() == controls.truncation {
            model
        } else {
            model.with_truncation(controls.truncation)?
        };
        let g_qp = sources.heat.at_quadrature(&mesh);
        if g_qp.iter().any(|g| *g < 0.0) {
            return Err(Error::ConfigInvalid(vec![
                "(A8) heat source must be non-negative".into()
            ]));
        }
        let heat_load = integrate_against_shape(&mesh, &g_qp);
        let mut l_qp = vec![0.0; mesh.quad_count() * d];
        for (c, prof) in sources.load.iter().enumerate() {
            prof.check(d)?;
            for (k, v) in prof.at_quadrature(&mesh).into_iter().enumerate() {
                l_qp[k * d + c] = v;
            }
        }
        let mech_load = integrate_vector_load(&mesh, &l_qp);
        Ok(Problem {
            lumped: lumped_masses(&mesh),
            vector_mass: assemble_vector_mass(&mesh)?,
            dirichlet: mesh.vector_boundary(),
            plap: PLaplacian::new(model.coeffs.p, controls.eps_p),
            heat_load,
            mech_load,
            mesh,
            model,
            sources,
        })
    }

    pub fn lumped_masses(&self) -> &[f64] {
        &self.lumped
    }

    pub fn vector_mass(&self) -> &CsrMatrix {
        &self.vector_mass
    }

    /// `∫ g`
    pub fn heat_source_total(&self) -> f64 {
        self.heat_load.iter().sum()
    }

    /// `∫ ℓ·z` for an interleaved nodal vector field `z`.
    pub fn load_work(&self, z: &[f64]) -> f64 {
        self.mech_load.iter().zip(z).map(|(a, b)| a * b).sum()
    }

    /// Nodal values `Θ_M(w_i)`.
    pub fn theta_nodes(&self, w: &[f64]) -> Vec<f64> {
        w.iter().map(|x| self.model.enthalpy.theta_m_value(*x)).collect()
    }

    /// `Cε(u):ε(u)` at every quadrature point.
    pub fn strain_energy_density(&self, u: &[f64]) -> Vec<f64> {
        let c = &self.model.coeffs.stiffness;
        self.mesh.strain_qp(u).iter().map(|e| c.contract(e, e)).collect()
    }

    /// A scalar coefficient evaluated at the quadrature values of `field`.
    pub(crate) fn at_qp(&self, field: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.mesh.interpolate_qp(field).into_iter().map(f).collect()
    }

    pub fn check_state(&self, state: &FieldState) -> Result<()> {
        state.check(&self.mesh)
    }
}
