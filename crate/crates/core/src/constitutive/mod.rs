//! Coefficient functions, the enthalpy transformation with its truncated
//! variants, the convex-concave split of `b`, and exponent admissibility.

pub mod coefficients;
pub mod enthalpy;
pub mod exponents;
pub mod functions;
pub mod split;

pub use coefficients::{Assumption, CoefficientSet, ElasticTensor, InversionSettings, Model, Violation};
pub use enthalpy::{truncate, Conductivity, EnthalpyModel, PowerSeries};
pub use exponents::{growth_ratio_sup, h2_bootstrap_iterations, validate_exponents, Bootstrap, ExponentVerdict};
pub use functions::ScalarFn;
pub use split::ConvexConcaveSplit;
