//! Exponent admissibility and the integrability bootstrap for `H²` regularity.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentVerdict {
    pub admissible: bool,
    /// The first violated clause, when inadmissible.
    pub violation: Option<String>,
    pub r: Option<f64>,
    pub s: Option<f64>,
    pub s_star_star: Option<f64>,
}

impl ExponentVerdict {
    fn reject(clause: &str) -> Self {
        ExponentVerdict {
            admissible: false,
            violation: Some(clause.to_string()),
            r: None,
            s: None,
            s_star_star: None,
        }
    }
}

/// Check `σ ≥ 3`, `1/σ ≤ 2q − 1`, `q ≤ q₀ < q + ½` and derive the
/// integrability exponents `r`, `s`, `s**` of the enthalpy estimates.
pub fn validate_exponents(sigma: f64, q: f64, q0: f64) -> ExponentVerdict {
    if !(sigma > 0.0 && q > 0.0 && q0 > 0.0) || ![sigma, q, q0].iter().all(|v| v.is_finite()) {
        return ExponentVerdict::reject("σ, q, q₀ > 0");
    }
    if sigma < 3.0 {
        return ExponentVerdict::reject("σ ≥ 3");
    }
    if 1.0 / sigma > 2.0 * q - 1.0 {
        return ExponentVerdict::reject("1/σ ≤ 2q − 1");
    }
    if q > q0 {
        return ExponentVerdict::reject("q ≤ q₀");
    }
    if q0 >= q + 0.5 {
        return ExponentVerdict::reject("q₀ < q + ½");
    }
    let r = (2.0 * q + 2.0) / (2.0 * q0 + 1.0);
    assert!(r > 1.0 && r < 2.0, "admissible exponents must give 1 < r < 2, got {r}");
    ExponentVerdict {
        admissible: true,
        violation: None,
        r: Some(r),
        s: Some((6.0 * q + 6.0) / (6.0 * q - 2.0 * q0 + 5.0)),
        s_star_star: Some((6.0 * q + 6.0) / (2.0 * q - 2.0 * q0 + 1.0)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bootstrap {
    pub count: usize,
    /// `s₀, s₁, …, 2`
    pub trace: Vec<f64>,
}

/// Iterate `s ← min(f(s), 2)` with `f(s) = 3ps/(3p + 3s − ps)` from
/// `s₀ = 2p/(2 + p)` until `s = 2`.
pub fn h2_bootstrap_iterations(p: f64) -> Result<Bootstrap> {
    if !(p > 3.0) || !p.is_finite() {
        return Err(Error::domain(format!("bootstrap needs a finite p > 3, got {p}")));
    }
    let f = |s: f64| {
        let den = 3.0 * p + 3.0 * s - p * s;
        if den <= 0.0 {
            f64::INFINITY
        } else {
            3.0 * p * s / den
        }
    };
    let mut s = 2.0 * p / (2.0 + p);
    let mut trace = vec![s];
    while s < 2.0 {
        let next = f(s).min(2.0);
        // snap values within rounding of the target
        s = if next >= 2.0 - 1e-12 { 2.0 } else { next };
        trace.push(s);
    }
    Ok(Bootstrap {
        count: trace.len() - 1,
        trace,
    })
}

/// `sup_{y ≥ 0} c₀ (y^{1/σ} + 1)/(y + 1)^{α}`, the constant needed to bound
/// `Θ(w)/(w + 1)^{α}` under the growth condition `Θ(w) ≤ c₀(w^{1/σ} + 1)`.
///
/// Finite only when `α ≥ 1/σ`; the supremum is located on a logarithmic
/// grid and refined by golden-section search.
pub fn growth_ratio_sup(c0: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if !(c0 > 0.0 && sigma > 0.0 && alpha > 0.0) {
        return Err(Error::domain("growth ratio needs positive c₀, σ, α"));
    }
    if alpha < 1.0 / sigma {
        return Err(Error::domain(format!(
            "growth ratio is unbounded for α = {alpha} < 1/σ = {}",
            1.0 / sigma
        )));
    }
    let g = |t: f64| {
        let y = t.exp();
        (y.powf(1.0 / sigma) + 1.0) / (y + 1.0).powf(alpha)
    };
    let (lo, hi, n) = (-40.0f64, 200.0f64, 4801);
    let step = (hi - lo) / (n - 1) as f64;
    let (mut best_t, mut best) = (lo, g(lo));
    for i in 1..n {
        let t = lo + i as f64 * step;
        let v = g(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let (mut a, mut b) = (best_t - step, best_t + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if g(x1) < g(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    Ok(c0 * g(0.5 * (a + b)).max(best))
}
