//! Convex-concave decomposition `b = b₁ + b₂` on `[0, 1]`.
//!
//! With `A±(r) = ∫₀^r max/min(b'', 0)` and `B±(r) = ∫₀^r s·max/min(b''(s), 0) ds`
//! the iterated integrals collapse to
//!
//! ```text
//! b₁(r) = b(0) + b'(0)·r + r·A⁺(r) − B⁺(r)
//! b₂(r) = r·A⁻(r) − B⁻(r)
//! ```
//!
//! Cumulative composite Simpson tables of `A±`, `B±` are built once; an
//! arbitrary `r` adds the last partial cell. Every cell is cut at sign
//! changes of `b''` and at kinks of the family, so each Simpson piece
//! integrates a smooth function.

use crate::constitutive::functions::ScalarFn;
use crate::error::{Error, Result};

pub const DEFAULT_PANELS: usize = 512;

#[derive(Clone, Debug)]
pub struct ConvexConcaveSplit {
    b: ScalarFn,
    breaks: Vec<f64>,
    b0: f64,
    db0: f64,
    h: f64,
    /// Cumulative `[A⁺, B⁺, A⁻, B⁻]` at panel boundaries.
    cumulative: Vec<[f64; 4]>,
}

impl ConvexConcaveSplit {
    pub fn new(b: &ScalarFn, panels: usize) -> Result<Self> {
        b.check()?;
        if panels == 0 {
            return Err(Error::domain("split needs at least one panel"));
        }
        let h = 1.0 / panels as f64;
        let breaks = b.breakpoints();
        let mut cumulative = Vec::with_capacity(panels + 1);
        let mut acc = [0.0; 4];
        cumulative.push(acc);
        for j in 0..panels {
            let cell = panel(b, &breaks, j as f64 * h, (j + 1) as f64 * h)?;
            for (a, c) in acc.iter_mut().zip(cell) {
                *a += c;
            }
            cumulative.push(acc);
        }
        Ok(ConvexConcaveSplit {
            b: b.clone(),
            breaks,
            b0: b.value(0.0),
            db0: b.derivative(0.0),
            h,
            cumulative,
        })
    }

    pub fn original(&self) -> &ScalarFn {
        &self.b
    }

    /// `[A⁺, B⁺, A⁻, B⁻]` at `r`, clamped to `[0, 1]`.
    fn integrals(&self, r: f64) -> [f64; 4] {
        let r = r.clamp(0.0, 1.0);
        let j = ((r / self.h).floor() as usize).min(self.cumulative.len() - 2);
        let mut acc = self.cumulative[j];
        let left = j as f64 * self.h;
        if r > left {
            // b'' was finite on the whole table, so a sub-panel is too
            let cell = panel(&self.b, &self.breaks, left, r).expect("finite b'' checked at construction");
            for (a, c) in acc.iter_mut().zip(cell) {
                *a += c;
            }
        }
        acc
    }

    pub fn b1(&self, r: f64) -> f64 {
        let [ap, bp, _, _] = self.integrals(r);
        let r = r.clamp(0.0, 1.0);
        self.b0 + self.db0 * r + r * ap - bp
    }

    pub fn b2(&self, r: f64) -> f64 {
        let [_, _, am, bm] = self.integrals(r);
        let r = r.clamp(0.0, 1.0);
        r * am - bm
    }

    pub fn b1_prime(&self, r: f64) -> f64 {
        self.db0 + self.integrals(r)[0]
    }

    pub fn b2_prime(&self, r: f64) -> f64 {
        self.integrals(r)[2]
    }

    pub fn b1_second(&self, r: f64) -> f64 {
        self.b.second_derivative(r.clamp(0.0, 1.0)).max(0.0)
    }

    pub fn b2_second(&self, r: f64) -> f64 {
        self.b.second_derivative(r.clamp(0.0, 1.0)).min(0.0)
    }
}

/// Contributions of `[a, c]` to `[A⁺, B⁺, A⁻, B⁻]`.
fn panel(b: &ScalarFn, breaks: &[f64], a: f64, c: f64) -> Result<[f64; 4]> {
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&k| k > a && k < c));
    cuts.push(c);
    let mut out = [0.0; 4];
    for piece in cuts.windows(2) {
        let pts = sign_cuts(b, piece[0], piece[1])?;
        for sub in pts.windows(2) {
            let cell = simpson(b, sub[0], sub[1])?;
            for (o, v) in out.iter_mut().zip(cell) {
                *o += v;
            }
        }
    }
    Ok(out)
}

/// `[a, ..roots of b''.., c]`, roots located by bisection between sign
/// changes on a 9-point sample.
fn sign_cuts(b: &ScalarFn, a: f64, c: f64) -> Result<Vec<f64>> {
    const SAMPLES: usize = 8;
    let xs: Vec<f64> = (0..=SAMPLES).map(|k| a + (c - a) * k as f64 / SAMPLES as f64).collect();
    let mut vals = Vec::with_capacity(xs.len());
    for &x in &xs {
        let v = b.second_derivative(x);
        if !v.is_finite() {
            return Err(Error::Coefficient(format!("b'' is not finite at {x}")));
        }
        vals.push(v);
    }
    let mut cuts = vec![a];
    for k in 0..SAMPLES {
        if vals[k] * vals[k + 1] < 0.0 {
            let (mut lo, mut hi, flo) = (xs[k], xs[k + 1], vals[k]);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if b.second_derivative(mid) * flo > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON * hi.abs().max(1e-300) {
                    break;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
    }
    cuts.push(c);
    Ok(cuts)
}

fn simpson(b: &ScalarFn, a: f64, c: f64) -> Result<[f64; 4]> {
    let m = 0.5 * (a + c);
    let w = (c - a) / 6.0;
    let mut out = [0.0; 4];
    for (x, weight) in [(a, w), (m, 4.0 * w), (c, w)] {
        let d2 = b.second_derivative(x);
        if !d2.is_finite() {
            return Err(Error::Coefficient(format!("b'' is not finite at {x}")));
        }
        let (pos, neg) = (d2.max(0.0), d2.min(0.0));
        out[0] += weight * pos;
        out[1] += weight * x * pos;
        out[2] += weight * neg;
        out[3] += weight * x * neg;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Literal nested quadrature of the defining double integrals.
    fn nested(b: &ScalarFn, r: f64, sign: f64) -> f64 {
        let n = 400;
        let part = |x: f64| {
            let v = b.second_derivative(x);
            if sign > 0.0 {
                v.max(0.0)
            } else {
                v.min(0.0)
            }
        };
        let inner = |s: f64| simpson(&part, 0.0, s, n);
        simpson(&inner, 0.0, r, n)
    }

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, c: f64, n: usize) -> f64 {
        let h = (c - a) / n as f64;
        (0..n)
            .map(|j| {
                let x0 = a + j as f64 * h;
                h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h))
            })
            .sum()
    }

    #[test]
    fn convex_input_is_its_own_convex_part() {
        let b = ScalarFn::polynomial([0.1, 0.0, 1.0]);
        let s = ConvexConcaveSplit::new(&b, DEFAULT_PANELS).unwrap();
        for r in [0.0, 0.3, 0.77, 1.0] {
            assert_relative_eq!(s.b1(r), b.value(r), epsilon = 1e-14);
            assert_eq!(s.b2(r), 0.0);
        }
    }

    #[test]
    fn one_plus_sine() {
        let b = ScalarFn::trig(1.0, 1.0, 1.0, 0.0);
        let s = ConvexConcaveSplit::new(&b, DEFAULT_PANELS).unwrap();
        assert_relative_eq!(s.b1(1.0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(s.b2(1.0), 1f64.sin() - 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.b1(0.7) + s.b2(0.7), b.value(0.7), max_relative = 1e-12);
    }

    #[test]
    fn matches_closed_form_with_sign_change() {
        // b'' = 2 − 3.6x changes sign at x₀ = 5/9
        let b = ScalarFn::polynomial([0.3, 0.2, 1.0, -0.6]);
        let s = ConvexConcaveSplit::new(&b, DEFAULT_PANELS).unwrap();
        let x0 = 2.0 / 3.6;
        for r in [0.2, 0.5, 0.7, 0.9, 1.0] {
            // b₂(r) = ∫_{x₀}^r (r − s) b''(s) ds for r > x₀
            let g = |t: f64| 2.0 * r * t - 1.8 * r * t * t - t * t + 1.2 * t * t * t;
            let b2 = if r > x0 { g(r) - g(x0) } else { 0.0 };
            assert_relative_eq!(s.b2(r), b2, epsilon = 1e-14);
            assert_relative_eq!(s.b1(r), b.value(r) - b2, epsilon = 1e-14);
        }
    }

    #[test]
    fn matches_nested_quadrature() {
        let b = ScalarFn::trig(0.5, 0.4, 5.0, 0.3);
        let s = ConvexConcaveSplit::new(&b, DEFAULT_PANELS).unwrap();
        for r in [0.2, 0.5, 0.9] {
            let b1 = b.value(0.0) + b.derivative(0.0) * r + nested(&b, r, 1.0);
            assert_relative_eq!(s.b1(r), b1, epsilon = 1e-5);
            assert_relative_eq!(s.b2(r), nested(&b, r, -1.0), epsilon = 1e-5);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let b = ScalarFn::trig(0.5, 0.4, 5.0, 0.3);
        let s = ConvexConcaveSplit::new(&b, DEFAULT_PANELS).unwrap();
        let h = 1e-6;
        for r in [0.1, 0.45, 0.8] {
            assert_relative_eq!(s.b1_prime(r), (s.b1(r + h) - s.b1(r - h)) / (2.0 * h), epsilon = 1e-7);
            assert_relative_eq!(s.b2_prime(r), (s.b2(r + h) - s.b2(r - h)) / (2.0 * h), epsilon = 1e-7);
        }
    }

    #[test]
    fn tabulated_family_splits() {
        let values: Vec<f64> = (0..33)
            .map(|j| {
                let x = j as f64 / 32.0;
                1.0 + (3.0 * x).cos()
            })
            .collect();
        let b = ScalarFn::Tabulated { values: values.into() };
        let s = ConvexConcaveSplit::new(&b, DEFAULT_PANELS).unwrap();
        for r in [0.13, 0.5, 0.91] {
            assert_relative_eq!(s.b1(r) + s.b2(r), b.value(r), max_relative = 1e-12);
        }
    }

    #[test]
    fn convexity_by_second_differences() {
        let b = ScalarFn::trig(0.5, 0.4, 7.0, 0.1);
        let s = ConvexConcaveSplit::new(&b, DEFAULT_PANELS).unwrap();
        let n = 1000;
        let h = 1.0 / n as f64;
        for i in 1..n {
            let r = i as f64 * h;
            let d1 = s.b1(r + h) - 2.0 * s.b1(r) + s.b1(r - h);
            let d2 = s.b2(r + h) - 2.0 * s.b2(r) + s.b2(r - h);
            assert!(d1 >= -1e-13, "b1 second difference {d1} at {r}");
            assert!(d2 <= 1e-13, "b2 second difference {d2} at {r}");
        }
    }

    proptest! {
        #[test]
        fn split_identity(c in prop::collection::vec(-2.0f64..2.0, 1..6), r in 0.0f64..1.0) {
            let b = ScalarFn::polynomial(c);
            let s = ConvexConcaveSplit::new(&b, DEFAULT_PANELS).unwrap();
            let sum = s.b1(r) + s.b2(r);
            prop_assert!((sum - b.value(r)).abs() <= 1e-12 * b.value(r).abs().max(1.0));
        }
    }
}
