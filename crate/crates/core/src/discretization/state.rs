//! Nodal fields at one time level.

use serde::{Deserialize, Serialize};

use crate::discretization::mesh::Mesh;
use crate::error::{Error, Result};

/// Displacement and velocity are interleaved vector fields (`node·d + k`);
/// enthalpy and damage are scalar nodal fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub chi: Vec<f64>,
}

impl FieldState {
    pub fn zeros(mesh: &Mesh) -> Self {
        let n = mesh.node_count();
        FieldState {
            t: 0.0,
            u: vec![0.0; n * mesh.dim()],
            v: vec![0.0; n * mesh.dim()],
            w: vec![0.0; n],
            chi: vec![0.0; n],
        }
    }

    /// Sizes, finiteness, homogeneous Dirichlet data for `u` and `v`, and
    /// `0 ≤ χ ≤ 1`.
    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        let (n, d) = (mesh.node_count(), mesh.dim());
        if self.u.len() != n * d || self.v.len() != n * d || self.w.len() != n || self.chi.len() != n {
            return Err(Error::Mesh("field sizes do not match the mesh".into()));
        }
        let all = self.u.iter().chain(&self.v).chain(&self.w).chain(&self.chi);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::domain("field state contains non-finite values"));
        }
        for (i, b) in mesh.vector_boundary().iter().enumerate() {
            if *b && (self.u[i] != 0.0 || self.v[i] != 0.0) {
                return Err(Error::domain(format!(
                    "displacement or velocity does not vanish at boundary dof {i}"
                )));
            }
        }
        if let Some(i) = self.chi.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::domain(format!(
                "damage {} at node {i} leaves [0, 1]",
                self.chi[i]
            )));
        }
        Ok(())
    }
}
