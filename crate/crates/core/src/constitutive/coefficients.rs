//! Material coefficients, the stiffness tensor, and sampled checks of the
//! structural assumptions they must satisfy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constitutive::enthalpy::{Conductivity, EnthalpyModel, PowerSeries};
use crate::constitutive::exponents::validate_exponents;
use crate::constitutive::functions::{sample_grid, ScalarFn};
use crate::constitutive::split::{ConvexConcaveSplit, DEFAULT_PANELS};
use crate::error::{Error, Result};

/// Structural assumption a configuration can violate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
    A8,
    /// Admissibility of the initial data.
    InitialData,
    /// Numerical controls and file layout.
    Controls,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Assumption::A1 => "(A1)",
            Assumption::A2 => "(A2)",
            Assumption::A3 => "(A3)",
            Assumption::A4 => "(A4)",
            Assumption::A5 => "(A5)",
            Assumption::A6 => "(A6)",
            Assumption::A7 => "(A7)",
            Assumption::A8 => "(A8)",
            Assumption::InitialData => "(IC)",
            Assumption::Controls => "(controls)",
        };
        f.write_str(tag)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub assumption: Assumption,
    pub message: String,
}

impl Violation {
    pub fn new(assumption: Assumption, message: impl Into<String>) -> Self {
        Violation {
            assumption,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.assumption, self.message)
    }
}

/// Stiffness tensor in Voigt notation with engineering shear strain, so
/// that `e:Ce = ε_vᵀ C ε_v` for `ε_v = (ε₁₁, ε₂₂, 2ε₁₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticTensor {
    dim: usize,
    voigt: Vec<f64>,
}

impl ElasticTensor {
    pub fn scalar(value: f64) -> Self {
        ElasticTensor {
            dim: 1,
            voigt: vec![value],
        }
    }

    /// Plane-strain isotropic tensor with Lamé parameters.
    pub fn isotropic(lambda: f64, shear: f64) -> Self {
        let d = lambda + 2.0 * shear;
        ElasticTensor {
            dim: 2,
            voigt: vec![d, lambda, 0.0, lambda, d, 0.0, 0.0, 0.0, shear],
        }
    }

    pub fn from_voigt(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let n = voigt_size(dim)?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Coefficient(format!(
                "stiffness matrix must be {n}×{n} in dimension {dim}"
            )));
        }
        Ok(ElasticTensor {
            dim,
            voigt: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn voigt_size(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            3
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.voigt[i * self.voigt_size() + j]
    }

    /// `a:Cb` for Voigt strains `a`, `b`.
    pub fn contract(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.voigt_size();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[i] * self.voigt[i * n + j] * b[j];
            }
        }
        s
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.voigt_size();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let (a, b) = (self.entry(i, j), self.entry(j, i));
                (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1.0)
            })
        })
    }

    /// Smallest `e:Ce/|e|²` over a deterministic grid of strain directions.
    pub fn sampled_coercivity(&self) -> f64 {
        if self.dim == 1 {
            return self.voigt[0];
        }
        // |e|² = ε₁₁² + ε₂₂² + 2ε₁₂², parametrised on the unit sphere
        let (nt, np) = (64, 128);
        let mut best = f64::INFINITY;
        for it in 0..=nt {
            let t = std::f64::consts::PI * it as f64 / nt as f64;
            for ip in 0..np {
                let ph = 2.0 * std::f64::consts::PI * ip as f64 / np as f64;
                let (e11, e22, e12) = (t.sin() * ph.cos(), t.sin() * ph.sin(), t.cos() / 2f64.sqrt());
                let ev = [e11, e22, 2.0 * e12];
                best = best.min(self.contract(&ev, &ev));
            }
        }
        best
    }
}

fn voigt_size(dim: usize) -> Result<usize> {
    match dim {
        1 => Ok(1),
        2 => Ok(3),
        _ => Err(Error::Mesh(format!("unsupported dimension {dim}"))),
    }
}

/// All material functions and structural constants of the model.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub dim: usize,
    /// `c(θ)`
    pub heat_capacity: PowerSeries,
    pub conductivity: Conductivity,
    /// `ρ(χ)`
    pub thermal_expansion: ScalarFn,
    /// `a(χ)`
    pub viscosity: ScalarFn,
    /// `b(χ)`
    pub elasticity: ScalarFn,
    /// `γ(χ)`, the derivative of the damage potential `γ̂`.
    pub damage_potential_derivative: ScalarFn,
    pub stiffness: ElasticTensor,
    /// `D = μC`
    pub mu: f64,
    pub p: f64,
    pub sigma: f64,
    pub q: f64,
    pub q0: f64,
    pub eta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Sample points on `[0, w_max]`: zero plus a geometric sweep.
fn enthalpy_samples(w_max: f64) -> Vec<f64> {
    let n = 240;
    let lo: f64 = 1e-8;
    let ratio = (w_max / lo).ln() / (n - 1) as f64;
    std::iter::once(0.0)
        .chain((0..n).map(|i| lo * (ratio * i as f64).exp()))
        .collect()
}

impl CoefficientSet {
    /// Sampled checks of (A2)–(A8) against a built enthalpy model.
    pub fn validate(&self, enthalpy: &EnthalpyModel) -> Vec<Violation> {
        let mut out = Vec::new();
        let samples = 1001;
        let rel = |x: f64| 1e-9 * x.abs().max(1.0);

        let verdict = validate_exponents(self.sigma, self.q, self.q0);
        if let Some(clause) = verdict.violation {
            let tag = if clause.contains('σ') && !clause.contains('q') {
                Assumption::A2
            } else {
                Assumption::A3
            };
            out.push(Violation::new(tag, format!("exponent clause {clause} fails")));
        }
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2)] {
            if !(v > 0.0 && v.is_finite()) {
                let tag = if name == "c0" { Assumption::A2 } else { Assumption::A3 };
                out.push(Violation::new(tag, format!("growth constant {name} must be positive")));
            }
        }

        let mut prev = 0.0;
        for w in enthalpy_samples(enthalpy.w_max()) {
            let th = enthalpy.theta(w);
            if th < 0.0 || th < prev - enthalpy.tolerance() {
                out.push(Violation::new(
                    Assumption::A2,
                    format!("Θ is negative or decreasing at w = {w:e}"),
                ));
                break;
            }
            prev = th;
            let bound = self.c0 * (w.powf(1.0 / self.sigma) + 1.0);
            if th > bound + rel(bound) {
                out.push(Violation::new(
                    Assumption::A2,
                    format!("Θ({w:e}) = {th:e} exceeds c₀(w^(1/σ)+1) = {bound:e}"),
                ));
                break;
            }
        }
        for w in enthalpy_samples(enthalpy.w_max()) {
            let k = enthalpy.k(w);
            let lower = self.c1 * (w.powf(2.0 * self.q) + 1.0);
            let upper = self.c2 * (w.powf(2.0 * self.q0) + 1.0);
            if !k.is_finite() || k < lower - rel(lower) || k > upper + rel(upper) {
                out.push(Violation::new(
                    Assumption::A3,
                    format!("K({w:e}) = {k:e} leaves [c₁(w^2q+1), c₂(w^2q₀+1)] = [{lower:e}, {upper:e}]"),
                ));
                break;
            }
        }

        if let Err(e) = self.damage_potential_derivative.check() {
            out.push(Violation::new(Assumption::A4, e.to_string()));
        }

        if !(self.eta > 0.0) {
            out.push(Violation::new(Assumption::A5, "η must be positive"));
        }
        for (name, f) in [("a", &self.viscosity), ("b", &self.elasticity)] {
            if let Err(e) = f.check() {
                out.push(Violation::new(Assumption::A5, format!("{name}: {e}")));
                continue;
            }
            let min = f.sampled_min(samples);
            if min < self.eta {
                out.push(Violation::new(
                    Assumption::A5,
                    format!("{name} drops to {min:e} below η = {:e}", self.eta),
                ));
            }
        }
        if sample_grid(samples).any(|x| !self.elasticity.second_derivative(x).is_finite()) {
            out.push(Violation::new(Assumption::A5, "b'' is not finite on [0, 1]"));
        }

        if self.stiffness.dim() != self.dim {
            out.push(Violation::new(
                Assumption::A6,
                format!(
                    "stiffness is given for dimension {} but the mesh has dimension {}",
                    self.stiffness.dim(),
                    self.dim
                ),
            ));
        } else {
            if !self.stiffness.is_symmetric() {
                out.push(Violation::new(Assumption::A6, "stiffness tensor is not symmetric"));
            }
            let coercivity = self.stiffness.sampled_coercivity();
            if !(self.c3 > 0.0) || coercivity < self.c3 * (1.0 - 1e-12) {
                out.push(Violation::new(
                    Assumption::A6,
                    format!("e:Ce/|e|² reaches {coercivity:e}, below c₃ = {:e}", self.c3),
                ));
            }
        }
        if !(self.mu > 0.0) {
            out.push(Violation::new(Assumption::A6, "viscosity ratio μ must be positive"));
        }

        if let Err(e) = self.thermal_expansion.check() {
            out.push(Violation::new(Assumption::A7, e.to_string()));
        }

        if !(self.p > self.dim as f64) {
            out.push(Violation::new(
                Assumption::A8,
                format!("p = {} must exceed the dimension {}", self.p, self.dim),
            ));
        }
        out
    }

    pub fn gamma(&self, chi: f64) -> f64 {
        self.damage_potential_derivative.value(chi)
    }

    pub fn gamma_prime(&self, chi: f64) -> f64 {
        self.damage_potential_derivative.derivative(chi)
    }

    /// `γ̂(χ)` with `γ̂(0) = 0`.
    pub fn gamma_hat(&self, chi: f64) -> f64 {
        self.damage_potential_derivative.primitive(chi)
    }
}

/// A validated coefficient set together with its derived objects.
#[derive(Clone, Debug)]
pub struct Model {
    pub coeffs: CoefficientSet,
    pub enthalpy: EnthalpyModel,
    pub split: ConvexConcaveSplit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InversionSettings {
    pub w_max: f64,
    pub table_points: usize,
    pub tolerance: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        InversionSettings {
            w_max: 100.0,
            table_points: 513,
            tolerance: 1e-12,
        }
    }
}

impl Model {
    pub fn new(coeffs: CoefficientSet, truncation: f64, inversion: InversionSettings) -> Result<Self> {
        let enthalpy = EnthalpyModel::new(
            coeffs.heat_capacity.clone(),
            coeffs.conductivity.clone(),
            truncation,
            inversion.w_max,
            inversion.table_points,
            inversion.tolerance,
        )?;
        let violations = coeffs.validate(&enthalpy);
        if !violations.is_empty() {
            return Err(Error::ConfigInvalid(
                violations.iter().map(ToString::to_string).collect(),
            ));
        }
        Self::assemble(coeffs, enthalpy)
    }

    /// Builds a model without the structural checks (A1)–(A8). Meant for
    /// verification instances such as linear heat conduction, which
    /// deliberately violate the growth conditions. Data errors are still
    /// reported.
    pub fn new_unchecked(coeffs: CoefficientSet, truncation: f64, inversion: InversionSettings) -> Result<Self> {
        let enthalpy = EnthalpyModel::new(
            coeffs.heat_capacity.clone(),
            coeffs.conductivity.clone(),
            truncation,
            inversion.w_max,
            inversion.table_points,
            inversion.tolerance,
        )?;
        for f in [
            &coeffs.thermal_expansion,
            &coeffs.viscosity,
            &coeffs.elasticity,
            &coeffs.damage_potential_derivative,
        ] {
            f.check()?;
        }
        Self::assemble(coeffs, enthalpy)
    }

    fn assemble(coeffs: CoefficientSet, enthalpy: EnthalpyModel) -> Result<Self> {
        let split = ConvexConcaveSplit::new(&coeffs.elasticity, DEFAULT_PANELS)?;
        Ok(Model {
            coeffs,
            enthalpy,
            split,
        })
    }

    pub fn with_truncation(&self, m: f64) -> Result<Self> {
        Ok(Model {
            enthalpy: self.enthalpy.with_truncation(m)?,
            ..self.clone()
        })
    }
}
