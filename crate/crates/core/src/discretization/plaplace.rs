//! Regularized p-Laplacian: energy `(1/p)∫(|∇χ|² + ε)^{p/2}`, its gradient
//! (the weak residual) and its Hessian.

use crate::discretization::assembly::scalar_form;
use crate::discretization::mesh::Mesh;
use crate::solver::CsrMatrix;

/// Default regularization `ε_p`.
pub const DEFAULT_EPS_P: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PLaplacian {
    pub p: f64,
    pub eps: f64,
}

impl PLaplacian {
    pub fn new(p: f64, eps: f64) -> Self {
        PLaplacian { p, eps }
    }

    /// `(|g|² + ε)^{(p−2)/2}`
    fn flux_factor(&self, s: f64) -> f64 {
        s.powf(0.5 * (self.p - 2.0))
    }

    pub fn energy(&self, mesh: &Mesh, chi: &[f64]) -> f64 {
        let grads = mesh.gradient_qp(chi);
        let vals: Vec<f64> = grads
            .iter()
            .map(|g| (g[0] * g[0] + g[1] * g[1] + self.eps).powf(0.5 * self.p) / self.p)
            .collect();
        mesh.integrate(&vals)
    }

    /// `(∫ (|∇χ|²+ε)^{(p−2)/2} ∇χ·∇φ_i)_i`
    pub fn residual(&self, mesh: &Mesh, chi: &[f64]) -> Vec<f64> {
        let grads = mesh.gradient_qp(chi);
        let nq = mesh.quad_points_per_element();
        let mut out = vec![0.0; mesh.node_count()];
        for e in 0..mesh.element_count() {
            let nodes = mesh.element(e);
            for q in 0..nq {
                let k = e * nq + q;
                let g = grads[k];
                let s = g[0] * g[0] + g[1] * g[1] + self.eps;
                let f = if s > 0.0 { self.flux_factor(s) } else { 0.0 } * mesh.quad_weights()[k];
                for (dn, &a) in mesh.shape_grad(e, q).iter().zip(nodes) {
                    out[a] += f * (g[0] * dn[0] + g[1] * dn[1]);
                }
            }
        }
        out
    }

    /// `(Σ_e |∫_e (|∇χ|²+ε)^{(p−2)/2} ∇χ·∇φ_i|)_i`, the size of the summands
    /// of [`PLaplacian::residual`]; it bounds the rounding error of the
    /// assembled residual.
    pub fn residual_magnitude(&self, mesh: &Mesh, chi: &[f64]) -> Vec<f64> {
        let grads = mesh.gradient_qp(chi);
        let nq = mesh.quad_points_per_element();
        let mut out = vec![0.0; mesh.node_count()];
        for e in 0..mesh.element_count() {
            let nodes = mesh.element(e);
            for q in 0..nq {
                let k = e * nq + q;
                let g = grads[k];
                let s = g[0] * g[0] + g[1] * g[1] + self.eps;
                let f = if s > 0.0 { self.flux_factor(s) } else { 0.0 } * mesh.quad_weights()[k];
                for (dn, &a) in mesh.shape_grad(e, q).iter().zip(nodes) {
                    out[a] += (f * (g[0] * dn[0] + g[1] * dn[1])).abs();
                }
            }
        }
        out
    }

    /// Hessian of the energy; symmetric positive semidefinite.
    pub fn jacobian(&self, mesh: &Mesh, chi: &[f64]) -> CsrMatrix {
        let grads = mesh.gradient_qp(chi);
        let nq = mesh.quad_points_per_element();
        scalar_form(mesh, |e, q, a, b| {
            let g = grads[e * nq + q];
            let s = g[0] * g[0] + g[1] * g[1] + self.eps;
            if s <= 0.0 {
                // p = 2 keeps a unit factor at zero gradient
                return if self.p == 2.0 {
                    let dn = mesh.shape_grad(e, q);
                    dn[a][0] * dn[b][0] + dn[a][1] * dn[b][1]
                } else {
                    0.0
                };
            }
            let dn = mesh.shape_grad(e, q);
            let f = self.flux_factor(s);
            let ga = g[0] * dn[a][0] + g[1] * dn[a][1];
            let gb = g[0] * dn[b][0] + g[1] * dn[b][1];
            f * (dn[a][0] * dn[b][0] + dn[a][1] * dn[b][1]) + (self.p - 2.0) * f / s * ga * gb
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::assembly::assemble_weighted_stiffness;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_field_has_zero_residual() {
        let m = Mesh::unit_square(5).unwrap();
        let r = PLaplacian::new(4.0, 1e-10).residual(&m, &[0.7; 25]);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn p_two_is_the_laplacian() {
        let m = Mesh::unit_interval(11).unwrap();
        let chi: Vec<f64> = (0..11).map(|i| ((i * i) as f64 * 0.1).cos()).collect();
        let r = PLaplacian::new(2.0, 0.0).residual(&m, &chi);
        let k = assemble_weighted_stiffness(&m, &vec![1.0; m.quad_count()]).unwrap();
        for (a, b) in r.iter().zip(k.mul_vec(&chi)) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!(PLaplacian::new(2.0, 0.0).jacobian(&m, &[0.0; 11]), k);
    }

    #[test]
    fn p_four_linear_profile_gives_boundary_functional() {
        let n = 21;
        let m = Mesh::unit_interval(n).unwrap();
        let chi: Vec<f64> = m.coords().iter().map(|c| c[0]).collect();
        let r = PLaplacian::new(4.0, 0.0).residual(&m, &chi);
        assert!((r[0] + 1.0).abs() <= 1e-10);
        assert!((r[n - 1] - 1.0).abs() <= 1e-10);
        assert!(r[1..n - 1].iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn jacobian_is_symmetric_psd() {
        let m = Mesh::unit_square(5).unwrap();
        let chi: Vec<f64> = m.coords().iter().map(|c| (3.0 * c[0]).sin() * c[1]).collect();
        let j = PLaplacian::new(3.5, 1e-10).jacobian(&m, &chi);
        assert!(j.is_symmetric(1e-12));
        for k in 0..10 {
            let v: Vec<f64> = (0..25).map(|i| ((i * (k + 1)) as f64).sin()).collect();
            assert!(j.bilinear(&v, &v) >= -1e-12);
        }
    }

    proptest! {
        #[test]
        fn residual_is_energy_gradient(seed in 0u64..1000, p in 2.5f64..6.0) {
            let m = Mesh::unit_square(4).unwrap();
            let pl = PLaplacian::new(p, 1e-10);
            let chi: Vec<f64> = (0..16).map(|i| (0.3 * (i as f64 + seed as f64)).sin()).collect();
            let dir: Vec<f64> = (0..16).map(|i| (1.7 * i as f64 + 0.1 * seed as f64).cos()).collect();
            let h = 1e-6;
            let plus: Vec<f64> = chi.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = chi.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
            let fd = (pl.energy(&m, &plus) - pl.energy(&m, &minus)) / (2.0 * h);
            let an: f64 = pl.residual(&m, &chi).iter().zip(&dir).map(|(a, b)| a * b).sum();
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3));
        }

        #[test]
        fn jacobian_is_residual_derivative(seed in 0u64..1000) {
            let m = Mesh::unit_interval(9).unwrap();
            let pl = PLaplacian::new(4.0, 1e-10);
            let chi: Vec<f64> = (0..9).map(|i| (0.7 * (i as f64 + seed as f64)).sin()).collect();
            let dir: Vec<f64> = (0..9).map(|i| (1.3 * i as f64).cos()).collect();
            let h = 1e-6;
            let plus: Vec<f64> = chi.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = chi.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
            let rp = pl.residual(&m, &plus);
            let rm = pl.residual(&m, &minus);
            let jd = pl.jacobian(&m, &chi).mul_vec(&dir);
            for i in 0..9 {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                prop_assert!((fd - jd[i]).abs() <= 1e-5 * jd[i].abs().max(1.0));
            }
        }
    }
}
