//! Enthalpy variable `w = ĉ(θ)`, its inverse `Θ`, the conductivity in the
//! enthalpy variable, and their truncated variants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp `x` to `[-m, m]`. `m` may be `+∞`.
pub fn truncate(x: f64, m: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("cannot truncate non-finite value {x}")));
    }
    if !(m > 0.0) {
        return Err(Error::domain(format!("truncation level must be positive, got {m}")));
    }
    Ok(x.clamp(-m, m))
}

/// `Σ a·θ^e` over `terms = [[a, e], ...]`, evaluated for `θ ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerSeries {
    pub terms: Vec<[f64; 2]>,
}

impl PowerSeries {
    pub fn new(terms: impl Into<Vec<[f64; 2]>>) -> Self {
        PowerSeries { terms: terms.into() }
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        self.terms.iter().map(|[a, e]| a * x.powf(*e)).sum()
    }

    /// Primitive vanishing at zero.
    pub fn primitive(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        self.terms.iter().map(|[a, e]| a * x.powf(e + 1.0) / (e + 1.0)).sum()
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Coefficient(format!("{what}: no terms given")));
        }
        for [a, e] in &self.terms {
            if !a.is_finite() || !e.is_finite() || *a < 0.0 || *e < 0.0 {
                return Err(Error::Coefficient(format!(
                    "{what}: term [{a}, {e}] needs a finite nonnegative coefficient and exponent"
                )));
            }
        }
        if self.terms.iter().all(|[a, _]| *a == 0.0) {
            return Err(Error::Coefficient(format!("{what}: all coefficients vanish")));
        }
        Ok(())
    }
}

/// Heat conductivity, given either directly in the enthalpy variable or as
/// a function of temperature that is transformed by `K(w) = 𝖪(Θ(w))/c(Θ(w))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Conductivity {
    Enthalpy { terms: PowerSeries },
    Temperature { terms: PowerSeries },
}

/// Monotone cubic table of `θ` against `w = ĉ(θ)` on `[0, w_max]`.
#[derive(Clone, Debug)]
struct InversionTable {
    w: Vec<f64>,
    theta: Vec<f64>,
    slope: Vec<f64>,
}

impl InversionTable {
    fn build(w: Vec<f64>, theta: Vec<f64>) -> Self {
        let n = w.len();
        let secant: Vec<f64> = (0..n - 1)
            .map(|j| (theta[j + 1] - theta[j]) / (w[j + 1] - w[j]))
            .collect();
        // Fritsch–Carlson limited slopes keep the interpolant monotone.
        let mut slope = vec![0.0; n];
        slope[0] = secant[0];
        slope[n - 1] = secant[n - 2];
        for j in 1..n - 1 {
            slope[j] = if secant[j - 1] * secant[j] <= 0.0 {
                0.0
            } else {
                let (h0, h1) = (w[j] - w[j - 1], w[j + 1] - w[j]);
                let (w0, w1) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                (w0 + w1) / (w0 / secant[j - 1] + w1 / secant[j])
            };
        }
        InversionTable { w, theta, slope }
    }

    fn w_max(&self) -> f64 {
        *self.w.last().unwrap()
    }

    fn bracket(&self, w: f64) -> usize {
        match self.w.binary_search_by(|probe| probe.total_cmp(&w)) {
            Ok(j) => j.min(self.w.len() - 2),
            Err(j) => j.saturating_sub(1).min(self.w.len() - 2),
        }
    }

    fn interpolate(&self, w: f64) -> f64 {
        let j = self.bracket(w);
        let h = self.w[j + 1] - self.w[j];
        let t = (w - self.w[j]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.theta[j]
            + (t3 - 2.0 * t2 + t) * h * self.slope[j]
            + (-2.0 * t3 + 3.0 * t2) * self.theta[j + 1]
            + (t3 - t2) * h * self.slope[j + 1]
    }
}

#[derive(Clone, Debug)]
pub struct EnthalpyModel {
    capacity: PowerSeries,
    conductivity: Conductivity,
    truncation: f64,
    tolerance: f64,
    table: InversionTable,
}

impl EnthalpyModel {
    /// Build the model and its inversion table on `[0, w_max]`.
    ///
    /// `truncation` is the level `M` and may be `f64::INFINITY`.
    pub fn new(
        capacity: PowerSeries,
        conductivity: Conductivity,
        truncation: f64,
        w_max: f64,
        table_points: usize,
        tolerance: f64,
    ) -> Result<Self> {
        capacity.check("heat capacity")?;
        match &conductivity {
            Conductivity::Enthalpy { terms } => terms.check("conductivity")?,
            Conductivity::Temperature { terms } => {
                terms.check("conductivity")?;
                if capacity.value(0.0) <= 0.0 {
                    return Err(Error::Coefficient(
                        "temperature-form conductivity needs c(0) > 0".into(),
                    ));
                }
            }
        }
        if !(truncation > 0.0) {
            return Err(Error::domain(format!(
                "truncation level must be positive, got {truncation}"
            )));
        }
        if !(w_max > 0.0 && w_max.is_finite()) {
            return Err(Error::domain(format!("w_max must be positive, got {w_max}")));
        }
        if table_points < 3 {
            return Err(Error::domain("inversion table needs at least 3 points"));
        }
        if !(tolerance > 0.0 && tolerance < 1e-2) {
            return Err(Error::domain(format!(
                "inversion tolerance must lie in (0, 1e-2), got {tolerance}"
            )));
        }
        let theta_max = solve_bisection(&capacity, w_max)?;
        let theta: Vec<f64> = (0..table_points)
            .map(|j| theta_max * j as f64 / (table_points - 1) as f64)
            .collect();
        let w: Vec<f64> = theta.iter().map(|&t| capacity.primitive(t)).collect();
        if w.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Coefficient(
                "heat capacity primitive is not strictly increasing on the table".into(),
            ));
        }
        Ok(EnthalpyModel {
            capacity,
            conductivity,
            truncation,
            tolerance,
            table: InversionTable::build(w, theta),
        })
    }

    pub fn with_truncation(&self, m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::domain(format!("truncation level must be positive, got {m}")));
        }
        Ok(EnthalpyModel {
            truncation: m,
            ..self.clone()
        })
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn w_max(&self) -> f64 {
        self.table.w_max()
    }

    pub fn capacity_terms(&self) -> &PowerSeries {
        &self.capacity
    }

    pub fn conductivity_form(&self) -> &Conductivity {
        &self.conductivity
    }

    /// Specific heat `c(θ)`.
    pub fn capacity(&self, theta: f64) -> f64 {
        self.capacity.value(theta)
    }

    /// `ĉ(θ)`, the primitive of `c` with `ĉ(0) = 0`.
    pub fn c_hat(&self, theta: f64) -> f64 {
        self.capacity.primitive(theta)
    }

    /// `Θ(w)`, zero for `w ≤ 0`. Non-finite input propagates.
    pub fn theta(&self, w: f64) -> f64 {
        if w.is_nan() {
            return f64::NAN;
        }
        if w <= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi, guess) = if w <= self.table.w_max() {
            let j = self.table.bracket(w);
            (self.table.theta[j], self.table.theta[j + 1], self.table.interpolate(w))
        } else {
            let t_max = *self.table.theta.last().unwrap();
            let mut hi = 2.0 * t_max.max(1.0);
            while self.c_hat(hi) < w && hi.is_finite() {
                hi *= 2.0;
            }
            (t_max, hi, 0.5 * (t_max + hi))
        };
        let mut theta = guess.clamp(lo, hi);
        for _ in 0..200 {
            let f = self.c_hat(theta) - w;
            if f == 0.0 {
                return theta;
            }
            if f > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let c = self.capacity(theta);
            let mut next = theta - f / c;
            if !(c > 0.0) || !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - theta).abs();
            theta = next;
            if step <= self.tolerance * 1e-3 * theta.max(1.0) || hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        theta
    }

    /// `Θ_M(w) = Θ(T_M(w))`.
    pub fn theta_m(&self, w: f64) -> Result<f64> {
        Ok(self.theta(truncate(w, self.truncation)?))
    }

    /// Infallible `Θ_M`; non-finite input yields NaN.
    pub fn theta_m_value(&self, w: f64) -> f64 {
        if w.is_nan() {
            f64::NAN
        } else {
            self.theta(w.min(self.truncation))
        }
    }

    /// Conductivity `K(w)`, extended by `K(0)` for negative arguments.
    pub fn k(&self, w: f64) -> f64 {
        let w = w.max(0.0);
        match &self.conductivity {
            Conductivity::Enthalpy { terms } => terms.value(w),
            Conductivity::Temperature { terms } => {
                let th = self.theta(w);
                terms.value(th) / self.capacity(th)
            }
        }
    }

    /// `K_M(w) = K(T_M(w))`.
    pub fn k_m(&self, w: f64) -> f64 {
        if w.is_nan() {
            return f64::NAN;
        }
        self.k(w.clamp(-self.truncation, self.truncation))
    }

    /// `K̂(x) = ∫₀ˣ K` for `x ≥ 0`.
    pub fn k_hat(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match &self.conductivity {
            Conductivity::Enthalpy { terms } => terms.primitive(x),
            Conductivity::Temperature { terms } => terms.primitive(self.theta(x)),
        }
    }

    /// `K̂(x)` on `[0, M]`, continued by `K̂(M) + x − M` above `M`.
    pub fn k_hat_m(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::domain(format!("k_hat_M needs a finite x ≥ 0, got {x}")));
        }
        let m = self.truncation;
        Ok(if x <= m { self.k_hat(x) } else { self.k_hat(m) + x - m })
    }

    /// Lipschitz bound for `Θ` from table secants and knot derivatives `1/c`.
    pub fn lipschitz_estimate(&self) -> f64 {
        let t = &self.table;
        let secant =
            t.w.windows(2)
                .zip(t.theta.windows(2))
                .map(|(w, th)| (th[1] - th[0]) / (w[1] - w[0]))
                .fold(0.0, f64::max);
        let knots = t.theta.iter().map(|&th| 1.0 / self.capacity(th)).fold(0.0, f64::max);
        secant.max(knots)
    }

    /// Largest gap between the bare table interpolant and the Newton-refined
    /// inverse, measured at cell midpoints.
    pub fn table_interpolation_error(&self) -> f64 {
        self.table
            .w
            .windows(2)
            .map(|p| {
                let mid = 0.5 * (p[0] + p[1]);
                (self.table.interpolate(mid) - self.theta(mid)).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn solve_bisection(capacity: &PowerSeries, w: f64) -> Result<f64> {
    let mut hi = 1.0;
    while capacity.primitive(hi) < w {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Coefficient(
                "heat capacity primitive does not reach w_max".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capacity.primitive(mid) < w {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cubic_model(m: f64) -> EnthalpyModel {
        // ĉ(θ) = θ³, K(w) = w² + 1
        EnthalpyModel::new(
            PowerSeries::new([[3.0, 2.0]]),
            Conductivity::Enthalpy {
                terms: PowerSeries::new([[1.0, 0.0], [1.0, 2.0]]),
            },
            m,
            100.0,
            257,
            1e-12,
        )
        .unwrap()
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(7.0, 5.0).unwrap(), 5.0);
        assert_eq!(truncate(3.0, 5.0).unwrap(), 3.0);
        assert_eq!(truncate(-8.0, 5.0).unwrap(), -5.0);
        assert!(truncate(f64::NAN, 5.0).is_err());
        assert!(truncate(1.0, 0.0).is_err());
        assert_eq!(truncate(1e300, f64::INFINITY).unwrap(), 1e300);
    }

    #[test]
    fn theta_m_examples() {
        assert_relative_eq!(cubic_model(1000.0).theta_m(8.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(cubic_model(7.0).theta_m(-4.0).unwrap(), 0.0);
        assert_relative_eq!(cubic_model(1.0).theta_m(8.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(cubic_model(1.0).theta_m(f64::INFINITY).is_err());
    }

    #[test]
    fn theta_beyond_table() {
        let m = cubic_model(f64::INFINITY);
        assert_relative_eq!(m.theta(1000.0), 10.0, epsilon = 1e-11);
    }

    #[test]
    fn k_m_examples() {
        assert_relative_eq!(cubic_model(10.0).k_m(2.0), 5.0);
        assert_relative_eq!(cubic_model(1.0).k_m(2.0), 2.0);
        assert_relative_eq!(cubic_model(3.0).k_m(0.0), 1.0);
    }

    #[test]
    fn k_hat_m_examples() {
        let m = cubic_model(1.0);
        let x: f64 = 0.5;
        // Simpson on the integrand 1 + w² is exact.
        let simpson = x / 6.0 * (1.0 + 4.0 * (1.0 + 0.0625) + (1.0 + 0.25));
        assert_relative_eq!(m.k_hat_m(x).unwrap(), simpson, epsilon = 1e-14);
        assert!((m.k_hat_m(x).unwrap() - 0.5417).abs() < 1e-4);
        assert_relative_eq!(m.k_hat_m(2.0).unwrap(), 7.0 / 3.0, epsilon = 1e-14);
        assert_eq!(m.k_hat_m(0.0).unwrap(), 0.0);
        assert!(m.k_hat_m(-1.0).is_err());
    }

    #[test]
    fn temperature_form_conductivity() {
        // c = 1 + 3θ², 𝖪 = 2 ⇒ K̂(x) = 2Θ(x)
        let model = EnthalpyModel::new(
            PowerSeries::new([[1.0, 0.0], [3.0, 2.0]]),
            Conductivity::Temperature {
                terms: PowerSeries::new([[2.0, 0.0]]),
            },
            f64::INFINITY,
            10.0,
            129,
            1e-12,
        )
        .unwrap();
        let w = 2.0; // θ + θ³ = 2 at θ = 1
        assert_relative_eq!(model.theta(w), 1.0, epsilon = 1e-12);
        assert_relative_eq!(model.k(w), 2.0 / 4.0, epsilon = 1e-12);
        assert_relative_eq!(model.k_hat(w), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_nonpositive_capacity() {
        let bad = EnthalpyModel::new(
            PowerSeries::new([[-1.0, 0.0]]),
            Conductivity::Enthalpy {
                terms: PowerSeries::new([[1.0, 0.0]]),
            },
            1.0,
            10.0,
            33,
            1e-12,
        );
        assert!(bad.is_err());
    }

    fn smooth_model() -> EnthalpyModel {
        EnthalpyModel::new(
            PowerSeries::new([[1.0, 0.0], [3.0, 2.0]]),
            Conductivity::Enthalpy {
                terms: PowerSeries::new([[1.0, 0.0], [1.0, 2.0]]),
            },
            50.0,
            100.0,
            257,
            1e-12,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn inversion_round_trip(theta in 0.0f64..6.0) {
            let m = cubic_model(f64::INFINITY);
            let back = m.theta(m.c_hat(theta));
            prop_assert!((back - theta).abs() <= 1e-12 * theta.max(1.0));
        }

        #[test]
        fn truncation_compatibility(w in -200.0f64..200.0) {
            let m = smooth_model();
            let t = truncate(w, m.truncation()).unwrap();
            prop_assert_eq!(m.theta_m(w).unwrap(), m.theta(t));
            prop_assert_eq!(m.k_m(w), m.k(t));
        }

        #[test]
        fn theta_monotone_and_lipschitz(a in -5.0f64..150.0, b in -5.0f64..150.0) {
            let m = smooth_model();
            let l = m.lipschitz_estimate();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.theta(lo) <= m.theta(hi) + 1e-12);
            prop_assert!((m.theta(a) - m.theta(b)).abs() <= l * (a - b).abs() + 1e-12);
        }

        #[test]
        fn k_hat_m_continuous_nondecreasing(x in 0.0f64..100.0, dx in 0.0f64..5.0) {
            let m = smooth_model();
            prop_assert!(m.k_hat_m(x + dx).unwrap() >= m.k_hat_m(x).unwrap() - 1e-12);
            let mm = m.truncation();
            let left = m.k_hat_m(mm).unwrap();
            let right = m.k_hat_m(mm * (1.0 + 1e-14)).unwrap();
            prop_assert!((left - right).abs() <= 1e-9 * left);
        }
    }
}
