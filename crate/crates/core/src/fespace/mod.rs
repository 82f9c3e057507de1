//! Conforming Lagrange spaces `S^p_0(T)` for `p = 1, 2, 3`.
//!
//! Global DOFs are numbered vertices first, then edge nodes (edges in sorted
//! vertex-pair order, nodes ordered from the lower to the higher vertex index),
//! then interior nodes by element.

mod assembly;
mod basis;
mod quadrature;

pub use assembly::{
    assemble_load_flux, assemble_load_gradient, assemble_load_scalar, assemble_mass_weighted, assemble_stiffness,
    elementwise_constant, gradient_integrals, values_at_quadrature, Diffusion, QuadPoint,
};
pub use basis::{LagrangeBasis, ShapeEval};
pub use quadrature::{LineRule, QuadratureRule};

use thiserror::Error;

use crate::mesh::{EdgeTopology, Point, Triangulation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeError {
    #[error("unsupported polynomial degree {0} (expected 1, 2 or 3)")]
    Degree(usize),
    #[error("element index {index} out of range ({len} elements)")]
    ElementOutOfRange { index: usize, len: usize },
    #[error("coefficient vector has length {got}, space has {expected} DOFs")]
    Length { got: usize, expected: usize },
    #[error("vector field is not constant on element {0}")]
    NotPiecewiseConstant(usize),
    #[error("point ({0}, {1}) lies outside the mesh")]
    OutsideMesh(f64, f64),
}

/// Affine data of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub corners: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(corners: [Point; 3]) -> Self {
        let [a, b, c] = corners;
        let area = crate::mesh::signed_area(a, b, c);
        let s = 1.0 / (2.0 * area);
        let grad_lambda = [
            [(b[1] - c[1]) * s, (c[0] - b[0]) * s],
            [(c[1] - a[1]) * s, (a[0] - c[0]) * s],
            [(a[1] - b[1]) * s, (b[0] - a[0]) * s],
        ];
        Self {
            corners,
            area,
            grad_lambda,
        }
    }

    pub fn point(&self, lambda: [f64; 3]) -> Point {
        let [a, b, c] = self.corners;
        [
            lambda[0] * a[0] + lambda[1] * b[0] + lambda[2] * c[0],
            lambda[0] * a[1] + lambda[1] * b[1] + lambda[2] * c[1],
        ]
    }

    pub fn gradient(&self, s: &ShapeEval) -> [f64; 2] {
        let g = &self.grad_lambda;
        [
            s.d[0] * g[0][0] + s.d[1] * g[1][0] + s.d[2] * g[2][0],
            s.d[0] * g[0][1] + s.d[1] * g[1][1] + s.d[2] * g[2][1],
        ]
    }

    pub fn hessian(&self, s: &ShapeEval) -> [[f64; 2]; 2] {
        let g = &self.grad_lambda;
        let mut h = [[0.0; 2]; 2];
        for a in 0..3 {
            for b in 0..3 {
                let w = s.dd[a][b];
                if w == 0.0 {
                    continue;
                }
                for i in 0..2 {
                    for j in 0..2 {
                        h[i][j] += w * g[a][i] * g[b][j];
                    }
                }
            }
        }
        h
    }
}

/// Value, gradient and Hessian of a discrete function at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointValue {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl PointValue {
    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1]
    }
}

/// Lagrange space of degree `p` on a triangulation, with homogeneous
/// Dirichlet constraints on the boundary edges.
#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Triangulation,
    topology: EdgeTopology,
    basis: LagrangeBasis,
    element_dofs: Vec<usize>,
    dof_coordinates: Vec<Point>,
    dirichlet: Vec<bool>,
    free_index: Vec<Option<usize>>,
    n_free: usize,
}

impl FeSpace {
    pub fn new(mesh: Triangulation, degree: usize) -> Result<Self, FeError> {
        if !(1..=3).contains(&degree) {
            return Err(FeError::Degree(degree));
        }
        let basis = LagrangeBasis::new(degree);
        let topology = mesh.topology();
        let nv = mesh.n_vertices();
        let ne = topology.edges.len();
        let per_edge = degree - 1;
        let per_elem = basis.n_interior();
        let ndofs = nv + ne * per_edge + mesh.n_elements() * per_elem;

        let mut dof_coordinates = vec![[0.0; 2]; ndofs];
        dof_coordinates[..nv].copy_from_slice(mesh.vertices());
        for (e, &[a, b]) in topology.edges.iter().enumerate() {
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            for k in 1..degree {
                let t = k as f64 / degree as f64;
                dof_coordinates[nv + e * per_edge + k - 1] = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            }
        }

        let n_local = basis.len();
        let mut element_dofs = Vec::with_capacity(n_local * mesh.n_elements());
        let interior_base = nv + ne * per_edge;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let mut interior = 0;
            for m in &basis.nodes {
                let nz: Vec<usize> = (0..3).filter(|&k| m[k] > 0).collect();
                let dof = match nz.len() {
                    1 => tri[nz[0]],
                    2 => {
                        let (va, vb) = (tri[nz[0]], tri[nz[1]]);
                        let e = topology.find(va, vb).expect("element edge in topology");
                        let w_hi = if va > vb { m[nz[0]] } else { m[nz[1]] };
                        nv + e * per_edge + w_hi - 1
                    }
                    _ => {
                        interior += 1;
                        interior_base + t * per_elem + interior - 1
                    }
                };
                element_dofs.push(dof);
            }
            for k in 0..per_elem {
                let m = basis.nodes[3 * degree + k];
                let geo = ElementGeometry::new(mesh.corners(t));
                let p = degree as f64;
                dof_coordinates[interior_base + t * per_elem + k] =
                    geo.point([m[0] as f64 / p, m[1] as f64 / p, m[2] as f64 / p]);
            }
        }

        let mut dirichlet = vec![false; ndofs];
        for &[a, b] in mesh.boundary_edges() {
            dirichlet[a] = true;
            dirichlet[b] = true;
            let e = topology.find(a, b).expect("boundary edge in topology");
            for k in 0..per_edge {
                dirichlet[nv + e * per_edge + k] = true;
            }
        }
        let mut n_free = 0;
        let free_index = dirichlet
            .iter()
            .map(|&d| {
                if d {
                    None
                } else {
                    n_free += 1;
                    Some(n_free - 1)
                }
            })
            .collect();

        Ok(Self {
            mesh,
            topology,
            basis,
            element_dofs,
            dof_coordinates,
            dirichlet,
            free_index,
            n_free,
        })
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.mesh
    }

    pub fn into_mesh(self) -> Triangulation {
        self.mesh
    }

    pub fn topology(&self) -> &EdgeTopology {
        &self.topology
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_coordinates.len()
    }

    /// Dimension of `S^p_0`, i.e. the number of unconstrained DOFs.
    pub fn dim(&self) -> usize {
        self.n_free
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn element_dofs(&self, element: usize) -> &[usize] {
        let n = self.basis.len();
        &self.element_dofs[element * n..(element + 1) * n]
    }

    pub fn dof_coordinates(&self) -> &[Point] {
        &self.dof_coordinates
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn free_index(&self) -> &[Option<usize>] {
        &self.free_index
    }

    pub fn geometry(&self, element: usize) -> ElementGeometry {
        ElementGeometry::new(self.mesh.corners(element))
    }

    /// Free-DOF vector extracted from a full coefficient vector.
    pub fn restrict_vector(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (i, m) in self.free_index.iter().enumerate() {
            if let Some(m) = m {
                out[*m] = full[i];
            }
        }
        out
    }

    /// Full coefficient vector with zero Dirichlet values.
    pub fn extend_vector(&self, free: &[f64]) -> Vec<f64> {
        self.free_index
            .iter()
            .map(|m| m.map_or(0.0, |m| free[m]))
            .collect()
    }

    pub fn zero_function(&self) -> DiscreteFunction<'_> {
        DiscreteFunction {
            space: self,
            coefficients: vec![0.0; self.n_dofs()],
        }
    }

    pub fn function(&self, coefficients: Vec<f64>) -> Result<DiscreteFunction<'_>, FeError> {
        if coefficients.len() != self.n_dofs() {
            return Err(FeError::Length {
                got: coefficients.len(),
                expected: self.n_dofs(),
            });
        }
        Ok(DiscreteFunction {
            space: self,
            coefficients,
        })
    }

    /// Nodal interpolant; Dirichlet DOFs take the value of `f` as well.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> DiscreteFunction<'_> {
        DiscreteFunction {
            space: self,
            coefficients: self.dof_coordinates.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Coefficient vector over all DOFs of a space.
#[derive(Clone, Debug)]
pub struct DiscreteFunction<'a> {
    space: &'a FeSpace,
    coefficients: Vec<f64>,
}

impl<'a> DiscreteFunction<'a> {
    pub fn space(&self) -> &'a FeSpace {
        self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Evaluates value, gradient and Hessian at barycentric points of an element.
    pub fn eval_element(&self, element: usize, points: &[[f64; 3]]) -> Result<Vec<PointValue>, FeError> {
        if element >= self.space.n_elements() {
            return Err(FeError::ElementOutOfRange {
                index: element,
                len: self.space.n_elements(),
            });
        }
        Ok(eval_coefficients(self.space, &self.coefficients, element, points))
    }

    /// Value at a physical point (linear element search).
    pub fn value_at(&self, x: Point) -> Result<f64, FeError> {
        let t = self.space.mesh.locate(x).ok_or(FeError::OutsideMesh(x[0], x[1]))?;
        let lambda = self.space.mesh.barycentric(t, x);
        Ok(eval_coefficients(self.space, &self.coefficients, t, &[lambda])[0].value)
    }

    /// Transfers the function to a space on a refined mesh by nodal interpolation.
    pub fn prolongate<'b>(&self, fine: &'b FeSpace) -> Result<DiscreteFunction<'b>, FeError> {
        let coarse_mesh = &self.space.mesh;
        let map = fine
            .mesh()
            .is_refinement_of(coarse_mesh)
            .map_err(|_| FeError::OutsideMesh(f64::NAN, f64::NAN))?;
        let mut coefficients = vec![0.0; fine.n_dofs()];
        let mut done = vec![false; fine.n_dofs()];
        for t in 0..fine.n_elements() {
            let parent = map.parent[t];
            for &dof in fine.element_dofs(t) {
                if done[dof] {
                    continue;
                }
                let lambda = coarse_mesh.barycentric(parent, fine.dof_coordinates[dof]);
                coefficients[dof] = eval_coefficients(self.space, &self.coefficients, parent, &[lambda])[0].value;
                done[dof] = true;
            }
        }
        Ok(DiscreteFunction {
            space: fine,
            coefficients,
        })
    }
}

pub(crate) fn eval_coefficients(
    space: &FeSpace,
    coefficients: &[f64],
    element: usize,
    points: &[[f64; 3]],
) -> Vec<PointValue> {
    let geo = space.geometry(element);
    let dofs = space.element_dofs(element);
    points
        .iter()
        .map(|&lambda| {
            let shapes = space.basis.eval(lambda);
            combine(&geo, dofs, coefficients, &shapes)
        })
        .collect()
}

pub(crate) fn combine(geo: &ElementGeometry, dofs: &[usize], coefficients: &[f64], shapes: &[ShapeEval]) -> PointValue {
    let mut out = PointValue::default();
    for (s, &dof) in shapes.iter().zip(dofs) {
        let c = coefficients[dof];
        if c == 0.0 {
            continue;
        }
        out.value += c * s.value;
        let g = geo.gradient(s);
        out.grad[0] += c * g[0];
        out.grad[1] += c * g[1];
        let h = geo.hessian(s);
        for i in 0..2 {
            for j in 0..2 {
                out.hess[i][j] += c * h[i][j];
            }
        }
    }
    out
}
