//! Banded Cholesky factorization for the symmetric positive-definite systems
//! of structured meshes, whose natural ordering already has a narrow band.

use crate::solver::sparse::CsrMatrix;
use crate::solver::SolverError;

/// Relative residual accepted by [`solve_spd`].
pub const SPD_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i][i-bw..=i]`, left-padded with zeros.
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolverError> {
        a.check_finite()?;
        let n = a.size();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    band[i * w + (bw - (i - j))] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = band[i * w + (bw - (i - j))];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= band[i * w + (bw - (i - k))] * band[j * w + (bw - (j - k))];
                }
                if j == i {
                    let diag = a.get(i, i);
                    if !(s > 1e-13 * diag.abs()) || !s.is_finite() {
                        return Err(SolverError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (bw - (i - j))] = s / band[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, band })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[i * w + (bw - (i - k))] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.band[k * w + (bw - (k - i))] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        y
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(rhs).map(|(p, q)| p - q).collect();
    let scale = norm(rhs);
    if scale == 0.0 {
        norm(&r)
    } else {
        norm(&r) / scale
    }
}

/// Direct SPD solve with one step of iterative refinement if the first
/// residual misses [`SPD_RESIDUAL_TOL`].
pub fn solve_spd(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    if rhs.len() != a.size() {
        return Err(SolverError::DimensionMismatch {
            expected: a.size(),
            found: rhs.len(),
        });
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite("right-hand side is not finite".into()));
    }
    let chol = BandedCholesky::factor(a)?;
    let mut x = chol.solve(rhs);
    let mut res = relative_residual(a, &x, rhs);
    if res > SPD_RESIDUAL_TOL {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, p)| b - p).collect();
        let dx = chol.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        res = relative_residual(a, &x, rhs);
    }
    if !(res <= SPD_RESIDUAL_TOL) {
        return Err(SolverError::ResidualTooLarge {
            residual: res,
            tolerance: SPD_RESIDUAL_TOL,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poisson(n: usize) -> CsrMatrix {
        let h = 1.0 / (n + 1) as f64;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / h));
            if i + 1 < n {
                t.push((i, i + 1, -1.0 / h));
                t.push((i + 1, i, -1.0 / h));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(solve_spd(&CsrMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn poisson_matches_manufactured_and_dense() {
        // -u'' = π² sin(πx): load vector by nodal quadrature
        let n = 99;
        let h = 1.0 / (n + 1) as f64;
        let a = poisson(n);
        let xs: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
        let b: Vec<f64> = xs
            .iter()
            .map(|x| h * std::f64::consts::PI.powi(2) * (std::f64::consts::PI * x).sin())
            .collect();
        let x = solve_spd(&a, &b).unwrap();
        let dense = dense_solve(a.to_dense(), b.clone());
        for (p, q) in x.iter().zip(&dense) {
            assert_relative_eq!(*p, *q, epsilon = 1e-9);
        }
        let err = xs
            .iter()
            .zip(&x)
            .map(|(xi, ui)| (ui - (std::f64::consts::PI * xi).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3);
        assert!(relative_residual(&a, &x, &b) <= 1e-10);
    }

    #[test]
    fn wide_band_matches_dense() {
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 10.0 + i as f64));
            for d in [1, 4] {
                if i + d < n {
                    let v = -1.0 / (1.0 + d as f64 + i as f64);
                    t.push((i, i + d, v));
                    t.push((i + d, i, v));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = solve_spd(&a, &b).unwrap();
        let d = dense_solve(a.to_dense(), b);
        for (p, q) in x.iter().zip(&d) {
            assert_relative_eq!(*p, *q, epsilon = 1e-13);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            solve_spd(&a, &[1.0, 1.0]),
            Err(SolverError::NotPositiveDefinite { row: 1, .. })
        ));
        // singular Neumann Laplacian
        let s = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]);
        assert!(solve_spd(&s, &[1.0, -1.0]).is_err());
    }
}
