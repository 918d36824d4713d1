//! Bound-constrained nonlinear solver for `lower ≤ x ≤ upper`.
//!
//! The problem is the first-order system of minimising a merit function over
//! a box: find `x` with `F(x) + ξ_lower + ξ_upper = 0`, `ξ_lower ≤ 0` only
//! where `x = lower`, `ξ_upper ≥ 0` only where `x = upper`. A primal-dual
//! active set (semismooth Newton) iteration is tried first; when its step is
//! unusable a projected-gradient step with Armijo backtracking is taken.

use serde::Serialize;

use crate::solver::cholesky::solve_spd;
use crate::solver::sparse::CsrMatrix;
use crate::solver::SolverError;

/// Nonlinear residual of a bound-constrained problem.
///
/// `residual` must be the gradient of `merit`; `jacobian` its symmetric
/// derivative.
pub trait ObstacleOperator {
    fn len(&self) -> usize;
    fn residual(&self, x: &[f64]) -> Vec<f64>;
    fn jacobian(&self, x: &[f64]) -> CsrMatrix;
    fn merit(&self, x: &[f64]) -> f64;

    /// Per-entry magnitude of the summands that make up `residual(x)`.
    /// Residual entries below a few ulps of it are treated as zero, since
    /// rounding in the assembly alone can produce them.
    fn residual_magnitude(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

/// Multiple of the machine epsilon, relative to the rounding level of an
/// entry (summand magnitudes plus the Jacobian row against `|x|`), below
/// which a residual entry counts as zero.
pub const ROUNDOFF_FACTOR: f64 = 64.0 * f64::EPSILON;

pub struct ObstacleProblem<'a> {
    pub operator: &'a dyn ObstacleOperator,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Positive nodal weights; residuals divided by them are compared with
    /// the tolerance.
    pub weights: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ObstacleSolution {
    pub x: Vec<f64>,
    /// Multiplier of the lower bound, `≤ 0`, in residual units.
    pub xi_lower: Vec<f64>,
    /// Multiplier of the upper bound, `≥ 0`, in residual units.
    pub xi_upper: Vec<f64>,
    pub active_lower: Vec<bool>,
    pub active_upper: Vec<bool>,
    pub iterations: usize,
    pub gradient_steps: usize,
    pub kkt_residual: f64,
    /// `max |ξ_i/w_i · min(x_i − lower_i, upper_i − x_i)|`
    pub complementarity: f64,
}

impl ObstacleSolution {
    pub fn xi(&self) -> Vec<f64> {
        self.xi_lower.iter().zip(&self.xi_upper).map(|(a, b)| a + b).collect()
    }
}

/// Convex quadratic `½xᵀAx − bᵀx`, with residual `Ax − b`.
pub struct QuadraticOperator {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
}

impl ObstacleOperator for QuadraticOperator {
    fn len(&self) -> usize {
        self.load.len()
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(&self.load) {
            *ri -= bi;
        }
        r
    }

    fn jacobian(&self, _x: &[f64]) -> CsrMatrix {
        self.matrix.clone()
    }

    fn merit(&self, x: &[f64]) -> f64 {
        0.5 * self.matrix.bilinear(x, x) - x.iter().zip(&self.load).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl ObstacleProblem<'_> {
    fn project(&self, x: &mut [f64]) {
        for ((xi, lo), up) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.max(*lo).min(*up);
        }
    }

    /// Whether every entry meets the tolerance or lies below the rounding
    /// level `magnitude`.
    fn converged(&self, x: &[f64], f: &[f64], magnitude: &[f64]) -> bool {
        (0..x.len()).all(|i| {
            let floor = ROUNDOFF_FACTOR * magnitude[i] / self.weights[i];
            self.kkt_entry(x, f, i) <= self.tolerance.max(floor)
        })
    }

    fn kkt_entry(&self, x: &[f64], f: &[f64], i: usize) -> f64 {
        let (lo, up) = (self.lower[i], self.upper[i]);
        if lo == up {
            return 0.0;
        }
        let g = f[i] / self.weights[i];
        if x[i] <= lo {
            (-g).max(0.0)
        } else if x[i] >= up {
            g.max(0.0)
        } else {
            g.abs()
        }
    }

    fn kkt(&self, x: &[f64], f: &[f64]) -> f64 {
        (0..x.len()).fold(0.0, |m, i| m.max(self.kkt_entry(x, f, i)))
    }

    fn check(&self) -> Result<(), SolverError> {
        let n = self.operator.len();
        for (name, len) in [
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
            ("weights", self.weights.len()),
        ] {
            if len != n {
                return Err(SolverError::Infeasible(format!(
                    "{name} has length {len}, expected {n}"
                )));
            }
        }
        if let Some(i) = (0..n).find(|&i| !(self.lower[i] <= self.upper[i])) {
            return Err(SolverError::Infeasible(format!(
                "empty box at node {i}: [{}, {}]",
                self.lower[i], self.upper[i]
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(SolverError::Infeasible("weights must be positive".into()));
        }
        Ok(())
    }
}

/// Summand magnitudes plus `Σ_j |J_ij x_j|`, the residual change caused by
/// perturbing every entry of `x` by one relative ulp.
fn rounding_level(op: &dyn ObstacleOperator, jac: &CsrMatrix, x: &[f64]) -> Vec<f64> {
    let mut level = op.residual_magnitude(x);
    for (i, l) in level.iter_mut().enumerate() {
        *l += jac.row(i).map(|(j, v)| (v * x[j]).abs()).sum::<f64>();
    }
    level
}

pub fn solve_obstacle(prob: &ObstacleProblem<'_>, initial: &[f64]) -> Result<ObstacleSolution, SolverError> {
    prob.check()?;
    let n = prob.operator.len();
    let mut x = initial.to_vec();
    prob.project(&mut x);
    let mut gradient_steps = 0;
    let mut pg_alpha = f64::NAN;
    for it in 0..=prob.max_iterations {
        let f = prob.operator.residual(&x);
        if f.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite(format!(
                "obstacle residual is not finite at iteration {it}"
            )));
        }
        let r = prob.kkt(&x, &f);
        if r <= prob.tolerance {
            return Ok(finish(prob, x, &f, it, gradient_steps, r));
        }
        let jac = prob.operator.jacobian(&x);
        if prob.converged(&x, &f, &rounding_level(prob.operator, &jac, &x)) {
            return Ok(finish(prob, x, &f, it, gradient_steps, r));
        }
        if it == prob.max_iterations {
            return Err(SolverError::NotConverged {
                iterations: it,
                residual: r,
            });
        }
        let merit0 = prob.operator.merit(&x);
        if let Some(y) = newton_step(prob, &x, &f, &jac, r, merit0) {
            x = y;
            continue;
        }
        gradient_steps += 1;
        if pg_alpha.is_nan() {
            let d = jac.diag();
            let curvature = (0..n).map(|i| d[i].abs() / prob.weights[i]).fold(0.0, f64::max);
            pg_alpha = if curvature > 0.0 { 1.0 / curvature } else { 1.0 };
        }
        let (y, alpha) = gradient_step(prob, &x, &f, merit0, 2.0 * pg_alpha)?;
        pg_alpha = alpha;
        x = y;
    }
    unreachable!("loop returns on its last iteration")
}

fn newton_step(
    prob: &ObstacleProblem<'_>,
    x: &[f64],
    f: &[f64],
    jac: &CsrMatrix,
    kkt0: f64,
    merit0: f64,
) -> Option<Vec<f64>> {
    let n = x.len();
    let diag = jac.diag();
    let mut d = vec![0.0; n];
    let mut free = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, up) = (prob.lower[i], prob.upper[i]);
        if lo == up {
            d[i] = lo - x[i];
            continue;
        }
        let scale = if diag[i] > 0.0 { diag[i] } else { prob.weights[i] };
        let pred = x[i] - f[i] / scale;
        if pred <= lo {
            d[i] = lo - x[i];
        } else if pred >= up {
            d[i] = up - x[i];
        } else {
            free.push(i);
        }
    }
    if !free.is_empty() {
        let mut is_free = vec![false; n];
        for &i in &free {
            is_free[i] = true;
        }
        let rhs: Vec<f64> = free
            .iter()
            .map(|&i| {
                -f[i]
                    - jac
                        .row(i)
                        .filter(|&(j, _)| !is_free[j])
                        .map(|(j, v)| v * d[j])
                        .sum::<f64>()
            })
            .collect();
        let df = solve_spd(&jac.submatrix(&free), &rhs).ok()?;
        for (k, &i) in free.iter().enumerate() {
            d[i] = df[k];
        }
    }
    let mut alpha = 1.0;
    for _ in 0..40 {
        let mut y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
        prob.project(&mut y);
        let decrease: f64 = f.iter().zip(y.iter().zip(x)).map(|(g, (a, b))| g * (a - b)).sum();
        let merit = prob.operator.merit(&y);
        if merit <= merit0 + 1e-4 * decrease.min(0.0) && (decrease < 0.0 || merit < merit0) {
            return Some(y);
        }
        let fy = prob.operator.residual(&y);
        if fy.iter().all(|v| v.is_finite()) && prob.kkt(&y, &fy) <= 0.5 * kkt0 {
            return Some(y);
        }
        alpha *= 0.5;
    }
    None
}

fn gradient_step(
    prob: &ObstacleProblem<'_>,
    x: &[f64],
    f: &[f64],
    merit0: f64,
    alpha0: f64,
) -> Result<(Vec<f64>, f64), SolverError> {
    let mut alpha = alpha0;
    for _ in 0..80 {
        let mut y: Vec<f64> = (0..x.len()).map(|i| x[i] - alpha * f[i] / prob.weights[i]).collect();
        prob.project(&mut y);
        let decrease: f64 = f.iter().zip(y.iter().zip(x)).map(|(g, (a, b))| g * (a - b)).sum();
        if prob.operator.merit(&y) <= merit0 + 1e-4 * decrease {
            return Ok((y, alpha));
        }
        alpha *= 0.5;
    }
    Err(SolverError::NotConverged {
        iterations: 0,
        residual: prob.kkt(x, f),
    })
}

fn finish(
    prob: &ObstacleProblem<'_>,
    x: Vec<f64>,
    f: &[f64],
    iterations: usize,
    gradient_steps: usize,
    kkt_residual: f64,
) -> ObstacleSolution {
    let n = x.len();
    let active_lower: Vec<bool> = (0..n).map(|i| x[i] == prob.lower[i]).collect();
    let active_upper: Vec<bool> = (0..n).map(|i| x[i] == prob.upper[i]).collect();
    let xi_lower: Vec<f64> = (0..n)
        .map(|i| if active_lower[i] { (-f[i]).min(0.0) } else { 0.0 })
        .collect();
    let xi_upper: Vec<f64> = (0..n)
        .map(|i| if active_upper[i] { (-f[i]).max(0.0) } else { 0.0 })
        .collect();
    let complementarity = (0..n)
        .map(|i| {
            let gap = (x[i] - prob.lower[i]).min(prob.upper[i] - x[i]);
            let gap = if gap.is_finite() { gap } else { 0.0 };
            ((xi_lower[i] + xi_upper[i]) / prob.weights[i] * gap).abs()
        })
        .fold(0.0, f64::max);
    ObstacleSolution {
        x,
        xi_lower,
        xi_upper,
        active_lower,
        active_upper,
        iterations,
        gradient_steps,
        kkt_residual,
        complementarity,
    }
}
