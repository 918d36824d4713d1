//! Jacobi-preconditioned conjugate gradients, used as an independent check
//! of the direct solver.

use crate::solver::cholesky::norm;
use crate::solver::sparse::CsrMatrix;
use crate::solver::SolverError;

#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

pub fn pcg(a: &CsrMatrix, rhs: &[f64], tol: f64, max_iter: usize) -> Result<PcgOutcome, SolverError> {
    let n = a.size();
    if rhs.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let inv_diag: Vec<f64> = a
        .diag()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let scale = norm(rhs).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..=max_iter {
        let res = norm(&r) / scale;
        if res <= tol {
            return Ok(PcgOutcome {
                solution: x,
                iterations: it,
                relative_residual: res,
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(SolverError::NotPositiveDefinite { row: it, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NotConverged {
        iterations: max_iter,
        residual: norm(&r) / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::cholesky::solve_spd;
    use approx::assert_relative_eq;

    #[test]
    fn agrees_with_direct_solver() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0 + (i % 3) as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let b: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).sin()).collect();
        let it = pcg(&a, &b, 1e-13, 500).unwrap();
        let direct = solve_spd(&a, &b).unwrap();
        for (p, q) in it.solution.iter().zip(&direct) {
            assert_relative_eq!(*p, *q, epsilon = 1e-11);
        }
    }
}
