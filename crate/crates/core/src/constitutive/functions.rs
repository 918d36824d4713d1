//! Built-in scalar coefficient families on the damage interval `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step used when a family has no analytic second derivative.
pub const FD_STEP: f64 = 1e-5;

/// A scalar function of the damage variable.
///
/// Every built-in family carries analytic derivatives up to second order;
/// tabulated samples are interpolated by a natural cubic spline, which is C².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarFn {
    Constant {
        value: f64,
    },
    /// `Σ coeffs[i] · x^i`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `offset + amplitude · sin(frequency · x + phase)`
    Trig {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Uniform samples on `[0, 1]`, first sample at 0, last at 1.
    Tabulated {
        values: Spline,
    },
}

/// Natural cubic spline through uniform samples on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spline {
    values: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

impl From<Vec<f64>> for Spline {
    fn from(values: Vec<f64>) -> Self {
        let n = values.len();
        let mut moments = vec![0.0; n];
        if n >= 3 {
            let h = 1.0 / (n - 1) as f64;
            // Thomas algorithm for M[j-1] + 4M[j] + M[j+1] = 6Δ²y/h²
            let m = n - 2;
            let mut c = vec![0.0; m];
            let mut d = vec![0.0; m];
            for k in 0..m {
                let j = k + 1;
                let rhs = 6.0 * (values[j + 1] - 2.0 * values[j] + values[j - 1]) / (h * h);
                let (denom, prev_d) = if k == 0 { (4.0, 0.0) } else { (4.0 - c[k - 1], d[k - 1]) };
                c[k] = 1.0 / denom;
                d[k] = (rhs - prev_d) / denom;
            }
            for k in (0..m).rev() {
                let next = if k + 1 < m { moments[k + 2] } else { 0.0 };
                moments[k + 1] = d[k] - c[k] * next;
            }
        }
        Spline { values, moments }
    }
}

impl From<Spline> for Vec<f64> {
    fn from(s: Spline) -> Self {
        s.values
    }
}

impl Spline {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn spacing(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    /// Value, first and second derivative; end cells are continued outside
    /// `[0, 1]`.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.values.len();
        let h = self.spacing();
        let j = ((x / h).floor() as isize).clamp(0, n as isize - 2) as usize;
        let t = x - j as f64 * h;
        let s = h - t;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.moments[j], self.moments[j + 1]);
        let a = y0 / h - m0 * h / 6.0;
        let b = y1 / h - m1 * h / 6.0;
        let value = (m0 * s * s * s + m1 * t * t * t) / (6.0 * h) + a * s + b * t;
        let d1 = (-m0 * s * s + m1 * t * t) / (2.0 * h) - a + b;
        let d2 = (m0 * s + m1 * t) / h;
        (value, d1, d2)
    }
}

impl ScalarFn {
    pub fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn polynomial(coeffs: impl Into<Vec<f64>>) -> Self {
        ScalarFn::Polynomial { coeffs: coeffs.into() }
    }

    pub fn trig(offset: f64, amplitude: f64, frequency: f64, phase: f64) -> Self {
        ScalarFn::Trig {
            offset,
            amplitude,
            frequency,
            phase,
        }
    }

    pub fn zero() -> Self {
        ScalarFn::Constant { value: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ScalarFn::Constant { value } if !value.is_finite() => {
                Err(Error::Coefficient("constant value is not finite".into()))
            }
            ScalarFn::Polynomial { coeffs } if coeffs.is_empty() || !finite(coeffs) => Err(Error::Coefficient(
                "polynomial needs at least one finite coefficient".into(),
            )),
            ScalarFn::Trig {
                offset,
                amplitude,
                frequency,
                phase,
            } if !finite(&[*offset, *amplitude, *frequency, *phase]) => {
                Err(Error::Coefficient("trigonometric parameters must be finite".into()))
            }
            ScalarFn::Tabulated { values } if values.values.len() < 2 || !finite(&values.values) => Err(
                Error::Coefficient("tabulated family needs at least two finite samples".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            ScalarFn::Trig {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * x + phase).sin(),
            ScalarFn::Tabulated { values } => values.eval(x).0,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant { .. } => 0.0,
            ScalarFn::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c),
            ScalarFn::Trig {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude * frequency * (frequency * x + phase).cos(),
            ScalarFn::Tabulated { values } => values.eval(x).1,
        }
    }

    /// Analytic second derivative, if the family provides one.
    pub fn second_derivative_exact(&self, x: f64) -> Option<f64> {
        match self {
            ScalarFn::Constant { .. } => Some(0.0),
            ScalarFn::Polynomial { coeffs } => Some(
                coeffs
                    .iter()
                    .enumerate()
                    .skip(2)
                    .rev()
                    .fold(0.0, |acc, (i, c)| acc * x + (i * (i - 1)) as f64 * c),
            ),
            ScalarFn::Trig {
                amplitude,
                frequency,
                phase,
                ..
            } => Some(-amplitude * frequency * frequency * (frequency * x + phase).sin()),
            ScalarFn::Tabulated { values } => Some(values.eval(x).2),
        }
    }

    /// Second derivative, analytic when available and otherwise a central
    /// difference of the values with step [`FD_STEP`].
    pub fn second_derivative(&self, x: f64) -> f64 {
        self.second_derivative_exact(x).unwrap_or_else(|| {
            let h = FD_STEP;
            (self.value(x + h) - 2.0 * self.value(x) + self.value(x - h)) / (h * h)
        })
    }

    /// Points inside `(0, 1)` where the second derivative may have a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ScalarFn::Tabulated { values } => {
                let n = values.values.len();
                (1..n.saturating_sub(1)).map(|j| j as f64 / (n - 1) as f64).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Primitive vanishing at zero. Exact for every family; the tabulated
    /// spline is cubic per cell, so cellwise Simpson integrates it exactly.
    pub fn primitive(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant { value } => value * x,
            ScalarFn::Polynomial { coeffs } => {
                coeffs
                    .iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (i, c)| acc * x + c / (i + 1) as f64)
                    * x
            }
            ScalarFn::Trig {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                if *frequency == 0.0 {
                    (offset + amplitude * phase.sin()) * x
                } else {
                    offset * x - amplitude / frequency * ((frequency * x + phase).cos() - phase.cos())
                }
            }
            ScalarFn::Tabulated { values } => {
                let h = values.spacing();
                let (lo, hi, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
                let mut knots = vec![lo];
                let first = (lo / h).floor() as i64 + 1;
                let last = (hi / h).ceil() as i64 - 1;
                knots.extend((first..=last).map(|j| j as f64 * h).filter(|&k| k > lo && k < hi));
                knots.push(hi);
                let f = |t: f64| values.eval(t).0;
                sign * knots
                    .windows(2)
                    .map(|k| (k[1] - k[0]) / 6.0 * (f(k[0]) + 4.0 * f(0.5 * (k[0] + k[1])) + f(k[1])))
                    .sum::<f64>()
            }
        }
    }

    /// Minimum over a uniform sample of `[0, 1]`.
    pub fn sampled_min(&self, samples: usize) -> f64 {
        sample_grid(samples)
            .map(|x| self.value(x))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn sample_grid(samples: usize) -> impl Iterator<Item = f64> {
    let n = samples.max(2);
    (0..n).map(move |i| i as f64 / (n - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_derivatives() {
        let f = ScalarFn::polynomial([0.3, 0.2, 1.0, -0.6]);
        assert_relative_eq!(f.value(0.5), 0.3 + 0.1 + 0.25 - 0.075, epsilon = 1e-15);
        assert_relative_eq!(f.derivative(0.5), 0.2 + 1.0 - 0.45, epsilon = 1e-15);
        assert_relative_eq!(f.second_derivative(0.5), 2.0 - 1.8, epsilon = 1e-14);
    }

    #[test]
    fn trig_derivatives() {
        let f = ScalarFn::trig(1.0, 1.0, 1.0, 0.0);
        assert_relative_eq!(f.value(0.3), 1.0 + 0.3f64.sin());
        assert_relative_eq!(f.derivative(0.3), 0.3f64.cos());
        assert_relative_eq!(f.second_derivative(0.3), -(0.3f64.sin()));
    }

    #[test]
    fn tabulated_spline_interpolates_and_is_c2() {
        let xs: Vec<f64> = sample_grid(41).collect();
        let values: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin()).collect();
        let f = ScalarFn::Tabulated { values: values.into() };
        for &x in &xs {
            assert_relative_eq!(f.value(x), (2.0 * x).sin(), epsilon = 1e-14);
        }
        // natural end conditions
        assert!(f.second_derivative(0.0).abs() < 1e-12);
        assert!(f.second_derivative(1.0).abs() < 1e-12);
        assert!((f.second_derivative(0.5) + 4.0 * 1f64.sin()).abs() < 1e-2);
        for &x in &xs[1..40] {
            let (l, r) = (f.second_derivative(x - 1e-12), f.second_derivative(x + 1e-12));
            assert!((l - r).abs() < 1e-8);
            assert_relative_eq!(
                f.derivative(x),
                (f.value(x + 1e-6) - f.value(x - 1e-6)) / 2e-6,
                epsilon = 1e-7
            );
        }
        // the finite-difference fallback agrees with the analytic value
        let h = FD_STEP;
        let fd = (f.value(0.33 + h) - 2.0 * f.value(0.33) + f.value(0.33 - h)) / (h * h);
        assert!((fd - f.second_derivative(0.33)).abs() < 1e-4);
    }

    #[test]
    fn primitives_match_quadrature() {
        let tab: Vec<f64> = sample_grid(9).map(|x| (2.0 * x).sin()).collect();
        let families = [
            ScalarFn::constant(2.5),
            ScalarFn::polynomial([0.3, -1.0, 2.0, 0.5]),
            ScalarFn::trig(0.2, 0.7, 3.0, 0.4),
            ScalarFn::Tabulated { values: tab.into() },
        ];
        for f in &families {
            for x in [0.0, 0.37, 1.0] {
                let n = 2000;
                let h = x / n as f64;
                let quad: f64 = (0..n)
                    .map(|j| {
                        let a = j as f64 * h;
                        h / 6.0 * (f.value(a) + 4.0 * f.value(a + 0.5 * h) + f.value(a + h))
                    })
                    .sum();
                assert_relative_eq!(f.primitive(x), quad, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn rejects_bad_families() {
        assert!(ScalarFn::polynomial(Vec::<f64>::new()).check().is_err());
        assert!(ScalarFn::Tabulated {
            values: vec![1.0].into()
        }
        .check()
        .is_err());
        assert!(ScalarFn::constant(f64::NAN).check().is_err());
        assert!(ScalarFn::trig(1.0, 0.5, 2.0, 0.0).check().is_ok());
    }
}
