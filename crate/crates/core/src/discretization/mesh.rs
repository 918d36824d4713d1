//! Structured meshes of the unit interval (P1) and unit square (Q1) with
//! precomputed Gauss quadrature tables.

use crate::error::{Error, Result};

/// Three-point Gauss rule on `[0, 1]`.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    /// Nodes along each axis.
    n_axis: usize,
    coords: Vec<[f64; 2]>,
    /// Node indices per element; P1 uses the first two entries.
    elements: Vec<[usize; 4]>,
    boundary: Vec<bool>,
    measures: Vec<f64>,
    /// Axis breakpoints, shared by both axes in 2-D.
    axis: Vec<f64>,
    quad: QuadratureTable,
}

/// Per element and quadrature point: physical weight, point, shape values
/// and shape gradients.
#[derive(Clone, Debug)]
struct QuadratureTable {
    nq: usize,
    npe: usize,
    weights: Vec<f64>,
    points: Vec<[f64; 2]>,
    shape: Vec<f64>,
    grad: Vec<[f64; 2]>,
}

impl Mesh {
    /// Uniform mesh of `[0, 1]` with `nodes` nodes.
    pub fn unit_interval(nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::Mesh(format!("need at least 2 nodes, got {nodes}")));
        }
        Mesh::interval_from_nodes(uniform_axis(nodes))
    }

    /// Interval mesh through the given increasing node coordinates, which
    /// must start at 0 and end at 1.
    pub fn interval_from_nodes(xs: Vec<f64>) -> Result<Self> {
        check_axis(&xs)?;
        let n = xs.len();
        let coords = xs.iter().map(|&x| [x, 0.0]).collect();
        let elements = (0..n - 1).map(|e| [e, e + 1, 0, 0]).collect();
        let mut boundary = vec![false; n];
        boundary[0] = true;
        boundary[n - 1] = true;
        let measures = xs.windows(2).map(|p| p[1] - p[0]).collect();
        let mut mesh = Mesh {
            dim: 1,
            n_axis: n,
            coords,
            elements,
            boundary,
            measures,
            axis: xs,
            quad: QuadratureTable::empty(),
        };
        mesh.quad = QuadratureTable::build(&mesh);
        Ok(mesh)
    }

    /// Uniform tensor mesh of `[0, 1]²` with `n` nodes per axis, node index
    /// `iy·n + ix`.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Mesh(format!("need at least 2 nodes per axis, got {n}")));
        }
        let axis = uniform_axis(n);
        let mut coords = Vec::with_capacity(n * n);
        let mut boundary = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                coords.push([axis[ix], axis[iy]]);
                boundary.push(ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1);
            }
        }
        let mut elements = Vec::with_capacity((n - 1) * (n - 1));
        let mut measures = Vec::with_capacity((n - 1) * (n - 1));
        for ey in 0..n - 1 {
            for ex in 0..n - 1 {
                let a = ey * n + ex;
                // counter-clockwise: (0,0), (1,0), (1,1), (0,1)
                elements.push([a, a + 1, a + n + 1, a + n]);
                measures.push((axis[ex + 1] - axis[ex]) * (axis[ey + 1] - axis[ey]));
            }
        }
        let mut mesh = Mesh {
            dim: 2,
            n_axis: n,
            coords,
            elements,
            boundary,
            measures,
            axis,
            quad: QuadratureTable::empty(),
        };
        mesh.quad = QuadratureTable::build(&mesh);
        Ok(mesh)
    }

    pub fn new(dim: usize, nodes_per_axis: usize) -> Result<Self> {
        match dim {
            1 => Mesh::unit_interval(nodes_per_axis),
            2 => Mesh::unit_square(nodes_per_axis),
            _ => Err(Error::Mesh(format!("unsupported dimension {dim}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n_axis
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.dim == 1 {
            2
        } else {
            4
        }
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn coordinate(&self, node: usize) -> &[f64] {
        &self.coords[node][..self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.nodes_per_element()]
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    /// Largest element diameter along an axis.
    pub fn h_max(&self) -> f64 {
        self.axis.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max)
    }

    /// Dirichlet flags on vector dofs `node·d + k`.
    pub fn vector_boundary(&self) -> Vec<bool> {
        self.boundary
            .iter()
            .flat_map(|&b| std::iter::repeat_n(b, self.dim))
            .collect()
    }

    pub fn quad_points_per_element(&self) -> usize {
        self.quad.nq
    }

    /// Total number of quadrature points.
    pub fn quad_count(&self) -> usize {
        self.quad.weights.len()
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad.weights
    }

    pub fn quad_points(&self) -> &[[f64; 2]] {
        &self.quad.points
    }

    /// Shape values of element `e` at its quadrature point `q`.
    pub fn shape(&self, e: usize, q: usize) -> &[f64] {
        let k = (e * self.quad.nq + q) * self.quad.npe;
        &self.quad.shape[k..k + self.quad.npe]
    }

    /// Shape gradients of element `e` at its quadrature point `q`.
    pub fn shape_grad(&self, e: usize, q: usize) -> &[[f64; 2]] {
        let k = (e * self.quad.nq + q) * self.quad.npe;
        &self.quad.grad[k..k + self.quad.npe]
    }

    /// Nodal field evaluated at every quadrature point.
    pub fn interpolate_qp(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), self.node_count());
        let nq = self.quad.nq;
        let mut out = Vec::with_capacity(self.quad_count());
        for e in 0..self.element_count() {
            let nodes = self.element(e);
            for q in 0..nq {
                out.push(self.shape(e, q).iter().zip(nodes).map(|(s, &a)| s * field[a]).sum());
            }
        }
        out
    }

    /// Gradient of a nodal field at every quadrature point.
    pub fn gradient_qp(&self, field: &[f64]) -> Vec<[f64; 2]> {
        assert_eq!(field.len(), self.node_count());
        let nq = self.quad.nq;
        let mut out = Vec::with_capacity(self.quad_count());
        for e in 0..self.element_count() {
            let nodes = self.element(e);
            for q in 0..nq {
                let mut g = [0.0; 2];
                for (dn, &a) in self.shape_grad(e, q).iter().zip(nodes) {
                    g[0] += dn[0] * field[a];
                    g[1] += dn[1] * field[a];
                }
                out.push(g);
            }
        }
        out
    }

    /// Voigt strain `(ε₁₁)` or `(ε₁₁, ε₂₂, 2ε₁₂)` of an interleaved vector
    /// field at every quadrature point.
    pub fn strain_qp(&self, u: &[f64]) -> Vec<[f64; 3]> {
        let d = self.dim;
        assert_eq!(u.len(), self.node_count() * d);
        let nq = self.quad.nq;
        let mut out = Vec::with_capacity(self.quad_count());
        for e in 0..self.element_count() {
            let nodes = self.element(e);
            for q in 0..nq {
                let mut eps = [0.0; 3];
                for (dn, &a) in self.shape_grad(e, q).iter().zip(nodes) {
                    if d == 1 {
                        eps[0] += dn[0] * u[a];
                    } else {
                        let (ux, uy) = (u[2 * a], u[2 * a + 1]);
                        eps[0] += dn[0] * ux;
                        eps[1] += dn[1] * uy;
                        eps[2] += dn[1] * ux + dn[0] * uy;
                    }
                }
                out.push(eps);
            }
        }
        out
    }

    /// Divergence of an interleaved vector field at every quadrature point.
    pub fn divergence_qp(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim;
        self.strain_qp(u)
            .into_iter()
            .map(|e| if d == 1 { e[0] } else { e[0] + e[1] })
            .collect()
    }

    /// `∫_Ω f` for `f` given at quadrature points.
    pub fn integrate(&self, values_qp: &[f64]) -> f64 {
        assert_eq!(values_qp.len(), self.quad_count());
        values_qp.iter().zip(&self.quad.weights).map(|(v, w)| v * w).sum()
    }

    /// Element containing `point` and the nodal shape values there.
    pub fn locate(&self, point: &[f64]) -> Result<(usize, Vec<f64>)> {
        if point.len() != self.dim || point.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Mesh(format!("query point {point:?} lies outside the domain")));
        }
        let cell = |x: f64| -> (usize, f64) {
            let j = match self.axis.binary_search_by(|a| a.total_cmp(&x)) {
                Ok(j) => j.min(self.axis.len() - 2),
                Err(j) => j - 1,
            };
            (j, (x - self.axis[j]) / (self.axis[j + 1] - self.axis[j]))
        };
        if self.dim == 1 {
            let (j, t) = cell(point[0]);
            Ok((j, vec![1.0 - t, t]))
        } else {
            let (jx, s) = cell(point[0]);
            let (jy, t) = cell(point[1]);
            Ok((
                jy * (self.n_axis - 1) + jx,
                vec![(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t],
            ))
        }
    }

    /// Value of the interpolant of a nodal field at `point`.
    pub fn evaluate(&self, field: &[f64], point: &[f64]) -> Result<f64> {
        let (e, shape) = self.locate(point)?;
        Ok(self.element(e).iter().zip(shape).map(|(&a, s)| field[a] * s).sum())
    }
}

fn uniform_axis(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn check_axis(xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::Mesh("need at least 2 nodes".into()));
    }
    if xs[0] != 0.0 || *xs.last().unwrap() != 1.0 {
        return Err(Error::Mesh("nodes must start at 0 and end at 1".into()));
    }
    if let Some(k) = xs.windows(2).position(|p| !(p[1] > p[0])) {
        return Err(Error::Assembly(format!(
            "degenerate element {k}: [{}, {}]",
            xs[k],
            xs[k + 1]
        )));
    }
    Ok(())
}

impl QuadratureTable {
    fn empty() -> Self {
        QuadratureTable {
            nq: 0,
            npe: 0,
            weights: Vec::new(),
            points: Vec::new(),
            shape: Vec::new(),
            grad: Vec::new(),
        }
    }

    fn build(mesh: &Mesh) -> Self {
        let ne = mesh.element_count();
        let npe = mesh.nodes_per_element();
        let nq = if mesh.dim == 1 { 3 } else { 9 };
        let mut t = QuadratureTable {
            nq,
            npe,
            weights: Vec::with_capacity(ne * nq),
            points: Vec::with_capacity(ne * nq),
            shape: Vec::with_capacity(ne * nq * npe),
            grad: Vec::with_capacity(ne * nq * npe),
        };
        for e in 0..ne {
            let nodes = mesh.elements[e];
            let x0 = mesh.coords[nodes[0]];
            if mesh.dim == 1 {
                let hx = mesh.coords[nodes[1]][0] - x0[0];
                for (s, w) in GAUSS3 {
                    t.weights.push(w * hx);
                    t.points.push([x0[0] + s * hx, 0.0]);
                    t.shape.extend([1.0 - s, s]);
                    t.grad.extend([[-1.0 / hx, 0.0], [1.0 / hx, 0.0]]);
                }
            } else {
                let hx = mesh.coords[nodes[1]][0] - x0[0];
                let hy = mesh.coords[nodes[3]][1] - x0[1];
                for (ty, wy) in GAUSS3 {
                    for (sx, wx) in GAUSS3 {
                        t.weights.push(wx * wy * hx * hy);
                        t.points.push([x0[0] + sx * hx, x0[1] + ty * hy]);
                        t.shape
                            .extend([(1.0 - sx) * (1.0 - ty), sx * (1.0 - ty), sx * ty, (1.0 - sx) * ty]);
                        t.grad.extend([
                            [-(1.0 - ty) / hx, -(1.0 - sx) / hy],
                            [(1.0 - ty) / hx, -sx / hy],
                            [ty / hx, sx / hy],
                            [-ty / hx, (1.0 - sx) / hy],
                        ]);
                    }
                }
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn measures_and_boundary() {
        let m = Mesh::unit_square(5).unwrap();
        assert_eq!(m.node_count(), 25);
        assert_eq!(m.element_count(), 16);
        assert_relative_eq!(m.measures().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for (c, b) in m.coords().iter().zip(m.boundary()) {
            let on = c.iter().any(|&x| x == 0.0 || x == 1.0);
            assert_eq!(on, *b);
        }
        assert_eq!(m.vector_boundary().iter().filter(|b| **b).count(), 2 * 16);
    }

    #[test]
    fn quadrature_of_one_is_area() {
        for m in [Mesh::unit_interval(7).unwrap(), Mesh::unit_square(4).unwrap()] {
            assert_relative_eq!(m.integrate(&vec![1.0; m.quad_count()]), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn affine_fields_are_reproduced() {
        let m = Mesh::unit_square(6).unwrap();
        let f: Vec<f64> = m.coords().iter().map(|c| 1.0 + 2.0 * c[0] - 3.0 * c[1]).collect();
        let vals = m.interpolate_qp(&f);
        let grads = m.gradient_qp(&f);
        for ((v, g), p) in vals.iter().zip(&grads).zip(m.quad_points()) {
            assert_relative_eq!(*v, 1.0 + 2.0 * p[0] - 3.0 * p[1], epsilon = 1e-13);
            assert_relative_eq!(g[0], 2.0, epsilon = 1e-12);
            assert_relative_eq!(g[1], -3.0, epsilon = 1e-12);
        }
        assert_relative_eq!(
            m.evaluate(&f, &[0.33, 0.71]).unwrap(),
            1.0 + 0.66 - 2.13,
            epsilon = 1e-13
        );
        assert!(m.evaluate(&f, &[1.2, 0.5]).is_err());
    }

    #[test]
    fn nodal_indicator_is_hat_function() {
        let m = Mesh::unit_interval(5).unwrap();
        let mut f = vec![0.0; 5];
        f[2] = 1.0;
        assert_relative_eq!(m.evaluate(&f, &[0.5]).unwrap(), 1.0);
        assert_relative_eq!(m.evaluate(&f, &[0.375]).unwrap(), 0.5);
        assert_relative_eq!(m.evaluate(&f, &[0.2]).unwrap(), 0.0);
    }

    #[test]
    fn strain_of_affine_displacement() {
        let m = Mesh::unit_square(4).unwrap();
        // u = (a x + b y, c x + d y)
        let (a, b, c, d) = (0.1, 0.2, -0.3, 0.4);
        let u: Vec<f64> = m
            .coords()
            .iter()
            .flat_map(|p| [a * p[0] + b * p[1], c * p[0] + d * p[1]])
            .collect();
        for e in m.strain_qp(&u) {
            assert_relative_eq!(e[0], a, epsilon = 1e-13);
            assert_relative_eq!(e[1], d, epsilon = 1e-13);
            assert_relative_eq!(e[2], b + c, epsilon = 1e-13);
        }
    }

    #[test]
    fn degenerate_interval_is_rejected() {
        assert!(matches!(
            Mesh::interval_from_nodes(vec![0.0, 0.5, 0.5, 1.0]),
            Err(Error::Assembly(_))
        ));
        assert!(Mesh::interval_from_nodes(vec![0.0, 0.3, 1.0]).is_ok());
    }
}
