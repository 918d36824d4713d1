//! Assembly of mass, diffusion and elasticity matrices and load vectors.
//!
//! Coefficient fields are passed as values at the quadrature points of
//! [`Mesh`], so every form in the scheme integrates with the same rule.

use crate::constitutive::ElasticTensor;
use crate::discretization::mesh::Mesh;
use crate::error::{Error, Result};
use crate::solver::CsrMatrix;

/// Consistent scalar mass matrix, or its row-sum lumping.
pub fn assemble_mass(mesh: &Mesh, lumped: bool) -> Result<CsrMatrix> {
    check_measures(mesh)?;
    let consistent = scalar_form(mesh, |e, q, a, b| {
        let s = mesh.shape(e, q);
        s[a] * s[b]
    });
    Ok(if lumped {
        CsrMatrix::diagonal(&consistent.row_sums())
    } else {
        consistent
    })
}

/// Row-sum lumped nodal masses `m_i = ∫φ_i`.
pub fn lumped_masses(mesh: &Mesh) -> Vec<f64> {
    integrate_against_shape(mesh, &vec![1.0; mesh.quad_count()])
}

/// `∫ k ∇φ_j·∇φ_i` with `k ≥ 0` given at quadrature points.
pub fn assemble_weighted_stiffness(mesh: &Mesh, weight_qp: &[f64]) -> Result<CsrMatrix> {
    check_measures(mesh)?;
    check_qp_len(mesh, weight_qp)?;
    if let Some(k) = weight_qp.iter().position(|w| !(*w >= 0.0)) {
        return Err(Error::Assembly(format!(
            "diffusion weight {} at quadrature point {k} is negative or not finite",
            weight_qp[k]
        )));
    }
    let nq = mesh.quad_points_per_element();
    Ok(scalar_form(mesh, |e, q, a, b| {
        let g = mesh.shape_grad(e, q);
        weight_qp[e * nq + q] * (g[a][0] * g[b][0] + g[a][1] * g[b][1])
    }))
}

/// Consistent mass on interleaved vector dofs.
pub fn assemble_vector_mass(mesh: &Mesh) -> Result<CsrMatrix> {
    let scalar = assemble_mass(mesh, false)?;
    Ok(expand_to_vector(&scalar, mesh.dim()))
}

/// `∫ m Cε(φ_j):ε(φ_i)` on interleaved vector dofs, `m > 0` at quadrature
/// points. No boundary conditions are applied.
pub fn assemble_elasticity(mesh: &Mesh, coefficient_qp: &[f64], tensor: &ElasticTensor) -> Result<CsrMatrix> {
    check_measures(mesh)?;
    check_qp_len(mesh, coefficient_qp)?;
    if tensor.dim() != mesh.dim() {
        return Err(Error::Assembly(format!(
            "stiffness of dimension {} on a mesh of dimension {}",
            tensor.dim(),
            mesh.dim()
        )));
    }
    if let Some(k) = coefficient_qp.iter().position(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::Assembly(format!(
            "elastic coefficient {} at quadrature point {k} is not positive",
            coefficient_qp[k]
        )));
    }
    let d = mesh.dim();
    let nq = mesh.quad_points_per_element();
    let npe = mesh.nodes_per_element();
    let ndof = npe * d;
    let mut triplets = Vec::with_capacity(mesh.element_count() * ndof * ndof);
    let mut local = vec![0.0; ndof * ndof];
    let mut bmat = vec![[0.0; 3]; ndof];
    for e in 0..mesh.element_count() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..nq {
            let w = mesh.quad_weights()[e * nq + q] * coefficient_qp[e * nq + q];
            for (a, g) in mesh.shape_grad(e, q).iter().enumerate() {
                if d == 1 {
                    bmat[a] = [g[0], 0.0, 0.0];
                } else {
                    bmat[2 * a] = [g[0], 0.0, g[1]];
                    bmat[2 * a + 1] = [0.0, g[1], g[0]];
                }
            }
            for i in 0..ndof {
                for j in 0..ndof {
                    local[i * ndof + j] += w * tensor.contract(&bmat[i], &bmat[j]);
                }
            }
        }
        let nodes = mesh.element(e);
        for i in 0..ndof {
            let gi = nodes[i / d] * d + i % d;
            for j in 0..ndof {
                let gj = nodes[j / d] * d + j % d;
                triplets.push((gi, gj, local[i * ndof + j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.node_count() * d, &triplets))
}

/// `(∫ f φ_i)_i` for `f` at quadrature points.
pub fn integrate_against_shape(mesh: &Mesh, values_qp: &[f64]) -> Vec<f64> {
    assert_eq!(values_qp.len(), mesh.quad_count());
    let nq = mesh.quad_points_per_element();
    let mut out = vec![0.0; mesh.node_count()];
    for e in 0..mesh.element_count() {
        let nodes = mesh.element(e);
        for q in 0..nq {
            let k = e * nq + q;
            let fw = values_qp[k] * mesh.quad_weights()[k];
            for (s, &a) in mesh.shape(e, q).iter().zip(nodes) {
                out[a] += fw * s;
            }
        }
    }
    out
}

/// `(∫ f div φ_j)_j` on interleaved vector dofs.
pub fn integrate_against_divergence(mesh: &Mesh, values_qp: &[f64]) -> Vec<f64> {
    assert_eq!(values_qp.len(), mesh.quad_count());
    let d = mesh.dim();
    let nq = mesh.quad_points_per_element();
    let mut out = vec![0.0; mesh.node_count() * d];
    for e in 0..mesh.element_count() {
        let nodes = mesh.element(e);
        for q in 0..nq {
            let k = e * nq + q;
            let fw = values_qp[k] * mesh.quad_weights()[k];
            for (g, &a) in mesh.shape_grad(e, q).iter().zip(nodes) {
                for c in 0..d {
                    out[a * d + c] += fw * g[c];
                }
            }
        }
    }
    out
}

/// `(∫ f·φ_j)_j` on interleaved vector dofs, `f` given per component at
/// quadrature points (`values_qp[k·d + c]`).
pub fn integrate_vector_load(mesh: &Mesh, values_qp: &[f64]) -> Vec<f64> {
    let d = mesh.dim();
    assert_eq!(values_qp.len(), mesh.quad_count() * d);
    let nq = mesh.quad_points_per_element();
    let mut out = vec![0.0; mesh.node_count() * d];
    for e in 0..mesh.element_count() {
        let nodes = mesh.element(e);
        for q in 0..nq {
            let k = e * nq + q;
            let w = mesh.quad_weights()[k];
            for (s, &a) in mesh.shape(e, q).iter().zip(nodes) {
                for c in 0..d {
                    out[a * d + c] += w * s * values_qp[k * d + c];
                }
            }
        }
    }
    out
}

/// Scalar bilinear form `Σ_e Σ_q w_q · integrand(e, q, a, b)`.
pub(crate) fn scalar_form(mesh: &Mesh, integrand: impl Fn(usize, usize, usize, usize) -> f64) -> CsrMatrix {
    let nq = mesh.quad_points_per_element();
    let npe = mesh.nodes_per_element();
    let mut triplets = Vec::with_capacity(mesh.element_count() * npe * npe);
    let mut local = vec![0.0; npe * npe];
    for e in 0..mesh.element_count() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..nq {
            let w = mesh.quad_weights()[e * nq + q];
            for a in 0..npe {
                for b in 0..npe {
                    local[a * npe + b] += w * integrand(e, q, a, b);
                }
            }
        }
        let nodes = mesh.element(e);
        for a in 0..npe {
            for b in 0..npe {
                triplets.push((nodes[a], nodes[b], local[a * npe + b]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.node_count(), &triplets)
}

fn expand_to_vector(scalar: &CsrMatrix, d: usize) -> CsrMatrix {
    if d == 1 {
        return scalar.clone();
    }
    let mut triplets = Vec::with_capacity(scalar.nnz() * d);
    for i in 0..scalar.size() {
        for (j, v) in scalar.row(i) {
            for c in 0..d {
                triplets.push((i * d + c, j * d + c, v));
            }
        }
    }
    CsrMatrix::from_triplets(scalar.size() * d, &triplets)
}

fn check_measures(mesh: &Mesh) -> Result<()> {
    match mesh.measures().iter().position(|m| !(*m > 0.0)) {
        None => Ok(()),
        Some(e) => Err(Error::Assembly(format!("degenerate element {e}"))),
    }
}

fn check_qp_len(mesh: &Mesh, values: &[f64]) -> Result<()> {
    if values.len() != mesh.quad_count() {
        return Err(Error::Assembly(format!(
            "expected {} quadrature values, got {}",
            mesh.quad_count(),
            values.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_spd;
    use approx::assert_relative_eq;

    #[test]
    fn lumped_mass_two_elements() {
        let m = Mesh::unit_interval(3).unwrap();
        let lumped = assemble_mass(&m, true).unwrap();
        assert_eq!(lumped.nnz(), 3);
        for (i, v) in [0.25, 0.5, 0.25].iter().enumerate() {
            assert_relative_eq!(lumped.get(i, i), *v, epsilon = 1e-15);
        }
    }

    #[test]
    fn consistent_mass_rows_and_total() {
        for m in [Mesh::unit_interval(9).unwrap(), Mesh::unit_square(5).unwrap()] {
            let c = assemble_mass(&m, false).unwrap();
            let lumped = lumped_masses(&m);
            for (r, l) in c.row_sums().iter().zip(&lumped) {
                assert_relative_eq!(*r, *l, epsilon = 1e-15);
            }
            assert_relative_eq!(lumped.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert!(c.is_symmetric(1e-12));
        }
    }

    #[test]
    fn stiffness_stencil_and_kernel() {
        let n = 6;
        let m = Mesh::unit_interval(n).unwrap();
        let h = 1.0 / (n - 1) as f64;
        let k1 = assemble_weighted_stiffness(&m, &vec![1.0; m.quad_count()]).unwrap();
        assert_relative_eq!(k1.get(2, 2), 2.0 / h, epsilon = 1e-12);
        assert_relative_eq!(k1.get(2, 3), -1.0 / h, epsilon = 1e-12);
        assert_relative_eq!(k1.get(0, 0), 1.0 / h, epsilon = 1e-12);
        let k2 = assemble_weighted_stiffness(&m, &vec![2.0; m.quad_count()]).unwrap();
        assert_eq!(k2, k1.scaled(2.0));
        let sq = Mesh::unit_square(5).unwrap();
        let ks = assemble_weighted_stiffness(&sq, &vec![1.0; sq.quad_count()]).unwrap();
        assert!(ks.mul_vec(&vec![1.0; sq.node_count()]).iter().all(|v| v.abs() <= 1e-12));
        assert!(ks.is_symmetric(1e-12));
        let mut bad = vec![1.0; m.quad_count()];
        bad[4] = -1e-3;
        assert!(assemble_weighted_stiffness(&m, &bad).is_err());
    }

    #[test]
    fn elasticity_1d_matches_stiffness() {
        let m = Mesh::unit_interval(8).unwrap();
        let ones = vec![1.0; m.quad_count()];
        let el = assemble_elasticity(&m, &ones, &ElasticTensor::scalar(1.0)).unwrap();
        let st = assemble_weighted_stiffness(&m, &ones).unwrap();
        assert_eq!(el, st);
        let el3 = assemble_elasticity(&m, &vec![3.0; m.quad_count()], &ElasticTensor::scalar(1.0)).unwrap();
        for i in 0..8 {
            for (j, v) in el3.row(i) {
                assert_relative_eq!(v, 3.0 * el.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn elasticity_2d_constrained_is_definite_and_passes_patch_test() {
        let m = Mesh::unit_square(5).unwrap();
        let tensor = ElasticTensor::isotropic(1.0, 0.5);
        let k = assemble_elasticity(&m, &vec![1.0; m.quad_count()], &tensor).unwrap();
        assert!(k.is_symmetric(1e-12));
        // rigid motions and affine strains: K u has no interior force
        let u: Vec<f64> = m
            .coords()
            .iter()
            .flat_map(|p| [0.1 * p[0] + 0.3 * p[1], -0.2 * p[0] + 0.05 * p[1]])
            .collect();
        let f = k.mul_vec(&u);
        for (i, b) in m.vector_boundary().iter().enumerate() {
            if !b {
                assert!(f[i].abs() < 1e-12, "interior force {} at dof {i}", f[i]);
            }
        }
        // definiteness on the constrained space: Cholesky succeeds
        let kc = k.constrain(&m.vector_boundary());
        assert!(solve_spd(&kc, &vec![1.0; kc.size()]).is_ok());
    }

    #[test]
    fn diffusion_patch_test() {
        let m = Mesh::unit_square(6).unwrap();
        let k = assemble_weighted_stiffness(&m, &vec![1.7; m.quad_count()]).unwrap();
        let u: Vec<f64> = m.coords().iter().map(|p| 2.0 - p[0] + 3.0 * p[1]).collect();
        let f = k.mul_vec(&u);
        for (i, b) in m.boundary().iter().enumerate() {
            if !b {
                assert!(f[i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_load_is_transpose_of_divergence() {
        let m = Mesh::unit_square(4).unwrap();
        let f: Vec<f64> = m.quad_points().iter().map(|p| p[0] * p[1] + 1.0).collect();
        let load = integrate_against_divergence(&m, &f);
        let u: Vec<f64> = (0..m.node_count() * 2).map(|i| (i as f64 * 0.37).sin()).collect();
        let div = m.divergence_qp(&u);
        let direct = m.integrate(&f.iter().zip(&div).map(|(a, b)| a * b).collect::<Vec<_>>());
        let via_load: f64 = load.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert_relative_eq!(direct, via_load, epsilon = 1e-13);
    }
}
