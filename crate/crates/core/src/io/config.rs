//! TOML run configuration: parsing, validation and problem construction.
//!
//! ```toml
//! [mesh]
//! dim = 1
//! nodes = 201
//!
//! [exponents]
//! p = 4.0
//! sigma = 3.0
//! q = 1.0
//! q0 = 1.0
//!
//! [constants]
//! mu = 0.05
//! eta = 0.1
//! c0 = 1.0
//! c1 = 1.0
//! c2 = 1.0
//! c3 = 1.0
//!
//! [coefficients]
//! heat_capacity = [[1.0, 0.0], [3.0, 2.0]]
//! conductivity = { form = "enthalpy", terms = [[1.0, 0.0], [1.0, 2.0]] }
//! thermal_expansion = { family = "polynomial", coeffs = [0.2, 0.3] }
//! viscosity = { family = "polynomial", coeffs = [0.5, 0.5] }
//! elasticity = { family = "polynomial", coeffs = [0.3, 0.2, 1.0, -0.6] }
//! gamma = { family = "polynomial", coeffs = [0.0, 0.4, -0.9] }
//! stiffness = { scalar = 1.0 }
//!
//! [initial]
//! u = [{ kind = "sine", amplitude = 1.5 }]
//! w = { kind = "cosine", offset = 0.5, amplitude = 0.3 }
//!
//! [controls]
//! tau = 1e-3
//!
//! [experiment]
//! final_time = 1.0
//! ```
//!
//! `[enthalpy]`, `[sources]`, `[output]`, `[audit]` and `[reference]` are
//! optional. Power series are lists of `[coefficient, exponent]` pairs.
//! Validation failures carry the tag of the violated assumption.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constitutive::{
    Assumption, CoefficientSet, Conductivity, ElasticTensor, InversionSettings, Model, PowerSeries, ScalarFn, Violation,
};
use crate::diagnostics::AuditTolerances;
use crate::discretization::{FieldState, Mesh};
use crate::error::{Error, Result};
use crate::stepper::{InitialData, Problem, Sources, StepControls};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub dim: usize,
    /// Nodes per axis.
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    pub p: f64,
    pub sigma: f64,
    pub q: f64,
    pub q0: f64,
    /// Exponent of the singular test function; `1/σ` when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantSection {
    pub mu: f64,
    pub eta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StiffnessSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voigt: Option<Vec<Vec<f64>>>,
}

impl StiffnessSpec {
    fn build(&self, dim: usize) -> std::result::Result<ElasticTensor, String> {
        match (self.scalar, self.lambda, self.shear, &self.voigt) {
            (Some(c), None, None, None) if dim == 1 => Ok(ElasticTensor::scalar(c)),
            (None, Some(l), Some(s), None) if dim == 2 => Ok(ElasticTensor::isotropic(l, s)),
            (None, None, None, Some(rows)) => ElasticTensor::from_voigt(dim, rows).map_err(|e| e.to_string()),
            _ => Err(format!(
                "stiffness needs exactly one of `scalar` (d = 1), `lambda` + `shear` (d = 2) or `voigt`; mesh has d = {dim}"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    pub heat_capacity: PowerSeries,
    pub conductivity: Conductivity,
    pub thermal_expansion: ScalarFn,
    pub viscosity: ScalarFn,
    pub elasticity: ScalarFn,
    /// Derivative `γ` of the damage potential.
    pub gamma: ScalarFn,
    pub stiffness: StiffnessSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnthalpySection {
    /// Upper end of the inversion table of `w = ĉ(θ)`.
    pub w_max: f64,
    pub table_points: usize,
    pub tolerance: f64,
}

impl Default for EnthalpySection {
    fn default() -> Self {
        let d = InversionSettings::default();
        EnthalpySection {
            w_max: d.w_max,
            table_points: d.table_points,
            tolerance: d.tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Write every `cadence`-th state as a snapshot.
    pub cadence: usize,
    /// Default output directory when none is given on the command line.
    pub directory: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            cadence: 1,
            directory: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub final_time: f64,
    /// Skip the structural checks (A1)–(A8); for verification instances
    /// that deliberately violate them.
    #[serde(default = "yes")]
    pub check_assumptions: bool,
}

fn yes() -> bool {
    true
}

/// Analytic reference for the decoupled heat equation (`c ≡ 1`, `K ≡ 1`,
/// `ρ ≡ 0`) with initial enthalpy `offset + amplitude·cos(kπx)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub offset: f64,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub mode: f64,
}

fn one() -> f64 {
    1.0
}

impl ReferenceSection {
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let k = self.mode * std::f64::consts::PI;
        self.offset + self.amplitude * (-k * k * t).exp() * (k * x).cos()
    }
}

/// The configuration document as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mesh: MeshSection,
    pub exponents: ExponentSection,
    pub constants: ConstantSection,
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub enthalpy: EnthalpySection,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub sources: Sources,
    #[serde(default)]
    pub controls: StepControls,
    #[serde(default)]
    pub output: OutputSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub audit: AuditTolerances,
    #[serde(default)]
    pub reference: Option<ReferenceSection>,
}

/// A validated configuration with the objects it describes.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub problem: Problem,
    pub controls: StepControls,
    pub initial: FieldState,
    pub final_time: f64,
    pub tolerances: AuditTolerances,
}

impl RunConfig {
    /// The same configuration with another truncation level.
    pub fn with_truncation(&self, m: f64) -> Result<Self> {
        let mut out = self.clone();
        out.file.controls.truncation = m;
        out.controls.truncation = m;
        out.problem.model = self.problem.model.with_truncation(m)?;
        Ok(out)
    }

    /// The same configuration with another time step.
    pub fn with_tau(&self, tau: f64) -> Self {
        let mut out = self.clone();
        out.file.controls.tau = tau;
        out.controls.tau = tau;
        out.controls.min_tau = out.controls.min_tau.min(tau);
        out
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(&self.file).map_err(|e| Error::Format {
            path: "config".into(),
            message: e.to_string(),
        })
    }
}

/// Line and column (both 1-based) of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::ConfigParse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    build(file)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn invalid(violations: Vec<Violation>) -> Error {
    Error::ConfigInvalid(violations.iter().map(ToString::to_string).collect())
}

/// Validates a parsed document and builds the problem and initial state.
pub fn build(file: ConfigFile) -> Result<RunConfig> {
    let mut v = Vec::new();
    let dim = file.mesh.dim;
    if !(dim == 1 || dim == 2) {
        v.push(Violation::new(
            Assumption::A1,
            format!("dimension must be 1 or 2, got {dim}"),
        ));
    }
    if file.mesh.nodes < 2 {
        v.push(Violation::new(Assumption::A1, "mesh needs at least 2 nodes per axis"));
    }
    for p in file.controls.problems() {
        v.push(Violation::new(Assumption::Controls, p));
    }
    if !(file.experiment.final_time > 0.0 && file.experiment.final_time.is_finite()) {
        v.push(Violation::new(Assumption::Controls, "final_time must be positive"));
    }
    if file.output.cadence == 0 {
        v.push(Violation::new(
            Assumption::Controls,
            "output cadence must be at least 1",
        ));
    }
    let stiffness = match file.coefficients.stiffness.build(dim) {
        Ok(s) => Some(s),
        Err(e) => {
            v.push(Violation::new(Assumption::A6, e));
            None
        }
    };
    if !v.is_empty() {
        return Err(invalid(v));
    }

    let (ex, co, cs) = (&file.exponents, &file.constants, &file.coefficients);
    let coeffs = CoefficientSet {
        dim,
        heat_capacity: cs.heat_capacity.clone(),
        conductivity: cs.conductivity.clone(),
        thermal_expansion: cs.thermal_expansion.clone(),
        viscosity: cs.viscosity.clone(),
        elasticity: cs.elasticity.clone(),
        damage_potential_derivative: cs.gamma.clone(),
        stiffness: stiffness.expect("checked above"),
        mu: co.mu,
        p: ex.p,
        sigma: ex.sigma,
        q: ex.q,
        q0: ex.q0,
        eta: co.eta,
        c0: co.c0,
        c1: co.c1,
        c2: co.c2,
        c3: co.c3,
    };
    let inversion = InversionSettings {
        w_max: file.enthalpy.w_max,
        table_points: file.enthalpy.table_points,
        tolerance: file.enthalpy.tolerance,
    };
    let model = if file.experiment.check_assumptions {
        Model::new(coeffs, file.controls.truncation, inversion)?
    } else {
        Model::new_unchecked(coeffs, file.controls.truncation, inversion)?
    };
    let mesh = Mesh::new(dim, file.mesh.nodes)?;

    let initial = file
        .initial
        .to_state(&mesh)
        .map_err(|e| invalid(vec![Violation::new(Assumption::InitialData, e.to_string())]))?;
    if let Some(w) = initial.w.iter().copied().find(|w| *w < 0.0) {
        v.push(Violation::new(
            Assumption::InitialData,
            format!("initial enthalpy must be non-negative; found w⁰ = {w}"),
        ));
    }
    if let Some(c) = initial.chi.iter().copied().find(|c| !(0.0..=1.0).contains(c)) {
        v.push(Violation::new(
            Assumption::InitialData,
            format!("initial damage must lie in [0, 1]; found χ⁰ = {c}"),
        ));
    }
    if file.sources.load.len() > dim || !(file.sources.load.is_empty() || file.sources.load.len() == dim) {
        v.push(Violation::new(
            Assumption::Controls,
            format!("mechanical load needs {dim} components"),
        ));
    }
    if let Some(g) = file
        .sources
        .heat
        .at_quadrature(&mesh)
        .into_iter()
        .chain(file.sources.heat.at_nodes(&mesh))
        .find(|g| *g < 0.0)
    {
        v.push(Violation::new(
            Assumption::A8,
            format!("heat source must be non-negative; found g = {g}"),
        ));
    }
    if let Some(a) = ex.alpha {
        if !(a >= 1.0 / ex.sigma && a <= 2.0 * ex.q - 1.0) {
            v.push(Violation::new(
                Assumption::A2,
                format!("singular test exponent α = {a} must lie in [1/σ, 2q − 1]"),
            ));
        }
    }
    if !v.is_empty() {
        return Err(invalid(v));
    }
    let problem = Problem::new(mesh, model, file.sources.clone(), &file.controls)?;
    let mut tolerances = file.audit;
    if tolerances.singular_alpha.is_none() {
        tolerances.singular_alpha = ex.alpha;
    }
    Ok(RunConfig {
        controls: file.controls.clone(),
        final_time: file.experiment.final_time,
        problem,
        initial,
        tolerances,
        file,
    })
}
