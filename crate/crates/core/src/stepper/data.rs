//! Spatial profiles for initial data and time-independent sources.

use serde::{Deserialize, Serialize};

use crate::discretization::{FieldState, Mesh};
use crate::error::{Error, Result};

/// A scalar function of position on the unit interval or square.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `offset + amplitude · cos(mode·πx) · cos(mode_y·πy)`
    Cosine {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        #[serde(default = "one")]
        mode: f64,
        #[serde(default)]
        mode_y: f64,
    },
    /// `amplitude · sin(mode·πx) · sin(mode_y·πy)`
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        mode: f64,
        #[serde(default = "one")]
        mode_y: f64,
    },
    /// `Σ coeffs[i] · x^i`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `offset + amplitude · exp(−|p − center|²/(2 width²))`
    Gaussian {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Uniform samples in `x` on `[0, 1]`, linearly interpolated.
    Tabulated {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn eval(&self, p: &[f64]) -> f64 {
        use std::f64::consts::PI;
        let x = p[0];
        let y = p.get(1).copied();
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Cosine {
                offset,
                amplitude,
                mode,
                mode_y,
            } => {
                let fy = y.map_or(1.0, |y| (mode_y * PI * y).cos());
                offset + amplitude * (mode * PI * x).cos() * fy
            }
            Profile::Sine {
                amplitude,
                mode,
                mode_y,
            } => {
                let fy = y.map_or(1.0, |y| (mode_y * PI * y).sin());
                amplitude * (mode * PI * x).sin() * fy
            }
            Profile::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Profile::Gaussian {
                offset,
                amplitude,
                center,
                width,
            } => {
                let r2: f64 = p.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                offset + amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            Profile::Tabulated { values } => {
                let n = values.len();
                let h = 1.0 / (n - 1) as f64;
                let j = ((x / h).floor() as usize).min(n - 2);
                let t = (x - j as f64 * h) / h;
                (1.0 - t) * values[j] + t * values[j + 1]
            }
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Profile::Zero => true,
            Profile::Constant { value } => value.is_finite(),
            Profile::Cosine {
                offset,
                amplitude,
                mode,
                mode_y,
            } => finite(&[*offset, *amplitude, *mode, *mode_y]),
            Profile::Sine {
                amplitude,
                mode,
                mode_y,
            } => finite(&[*amplitude, *mode, *mode_y]),
            Profile::Polynomial { coeffs } => !coeffs.is_empty() && finite(coeffs),
            Profile::Gaussian {
                offset,
                amplitude,
                center,
                width,
            } => center.len() == dim && *width > 0.0 && finite(&[*offset, *amplitude]) && finite(center),
            Profile::Tabulated { values } => values.len() >= 2 && finite(values),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("malformed profile {self:?}")))
        }
    }

    pub fn at_nodes(&self, mesh: &Mesh) -> Vec<f64> {
        (0..mesh.node_count()).map(|i| self.eval(mesh.coordinate(i))).collect()
    }

    pub fn at_quadrature(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.quad_points().iter().map(|p| self.eval(&p[..mesh.dim()])).collect()
    }
}

/// Initial displacement and velocity (one profile per component), enthalpy
/// and damage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    #[serde(default)]
    pub u: Vec<Profile>,
    #[serde(default)]
    pub v: Vec<Profile>,
    #[serde(default)]
    pub w: Profile,
    #[serde(default = "intact")]
    pub chi: Profile,
}

fn intact() -> Profile {
    Profile::Constant { value: 1.0 }
}

impl InitialData {
    /// Nodal interpolation. Displacement and velocity are set to zero on
    /// the Dirichlet boundary.
    pub fn to_state(&self, mesh: &Mesh) -> Result<FieldState> {
        let d = mesh.dim();
        let n = mesh.node_count();
        let vector = |profiles: &[Profile]| -> Result<Vec<f64>> {
            if !(profiles.is_empty() || profiles.len() == d) {
                return Err(Error::domain(format!(
                    "vector initial data needs {d} components, got {}",
                    profiles.len()
                )));
            }
            let mut out = vec![0.0; n * d];
            for (c, prof) in profiles.iter().enumerate() {
                prof.check(d)?;
                for i in 0..n {
                    if !mesh.boundary()[i] {
                        out[i * d + c] = prof.eval(mesh.coordinate(i));
                    }
                }
            }
            Ok(out)
        };
        self.w.check(d)?;
        self.chi.check(d)?;
        Ok(FieldState {
            t: 0.0,
            u: vector(&self.u)?,
            v: vector(&self.v)?,
            w: self.w.at_nodes(mesh),
            chi: self.chi.at_nodes(mesh),
        })
    }
}

/// Heat source `g` and mechanical load `ℓ`, constant in time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sources {
    #[serde(default)]
    pub heat: Profile,
    #[serde(default)]
    pub load: Vec<Profile>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn profiles_evaluate() {
        let c = Profile::Cosine {
            offset: 0.5,
            amplitude: 0.3,
            mode: 1.0,
            mode_y: 0.0,
        };
        assert_relative_eq!(c.eval(&[0.0]), 0.8);
        assert_relative_eq!(c.eval(&[1.0]), 0.2, epsilon = 1e-15);
        assert_relative_eq!(c.eval(&[0.0, 0.7]), 0.8);
        let p = Profile::Polynomial {
            coeffs: vec![1.0, -4.0, 4.0],
        };
        assert_relative_eq!(p.eval(&[0.5]), 0.0);
        let t = Profile::Tabulated {
            values: vec![0.0, 1.0, 0.0],
        };
        assert_relative_eq!(t.eval(&[0.25]), 0.5);
        let g = Profile::Gaussian {
            offset: 0.0,
            amplitude: 2.0,
            center: vec![0.5, 0.5],
            width: 0.1,
        };
        assert_relative_eq!(g.eval(&[0.5, 0.5]), 2.0);
        assert!(g.check(1).is_err());
        assert!(g.check(2).is_ok());
    }

    #[test]
    fn initial_state_respects_dirichlet() {
        let mesh = Mesh::unit_square(5).unwrap();
        let data = InitialData {
            u: vec![Profile::Constant { value: 1.0 }, Profile::Zero],
            v: vec![],
            w: Profile::Constant { value: 0.5 },
            chi: Profile::Constant { value: 1.0 },
        };
        let s = data.to_state(&mesh).unwrap();
        s.check(&mesh).unwrap();
        assert_eq!(s.u.iter().filter(|v| **v == 1.0).count(), 9);
        let bad = InitialData {
            u: vec![Profile::Zero],
            ..data
        };
        assert!(bad.to_state(&mesh).is_err());
    }
}
