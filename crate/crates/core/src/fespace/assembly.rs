//! Assembly of bilinear and linear forms over all DOFs (constrained ones included).
//!
//! Element contributions are computed independently, possibly in parallel, and
//! scattered sequentially in element order.

use super::{combine, ElementGeometry, FeError, FeSpace, PointValue, QuadratureRule, ShapeEval};
use crate::mesh::Point;
use crate::par::{self, Execution};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Quadrature point handed to data callbacks.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub element: usize,
    /// Index of the point within the rule.
    pub index: usize,
    pub x: Point,
    pub lambda: [f64; 3],
}

/// Diffusion coefficient of the stiffness form.
#[derive(Clone, Copy, Debug)]
pub enum Diffusion<'a> {
    Identity,
    /// One scalar per element.
    PerElement(&'a [f64]),
    /// Constant symmetric matrix.
    Matrix([[f64; 2]; 2]),
}

impl Diffusion<'_> {
    fn apply(&self, element: usize, g: [f64; 2]) -> [f64; 2] {
        match self {
            Diffusion::Identity => g,
            Diffusion::PerElement(c) => [c[element] * g[0], c[element] * g[1]],
            Diffusion::Matrix(a) => [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]],
        }
    }
}

fn tabulate(space: &FeSpace, rule: &QuadratureRule) -> Vec<Vec<ShapeEval>> {
    rule.points.iter().map(|&l| space.basis().eval(l)).collect()
}

fn scatter(space: &FeSpace, locals: Vec<Vec<f64>>) -> CsrMatrix {
    let n = space.basis().len();
    let mut b = TripletBuilder::with_capacity(space.n_dofs(), space.n_dofs(), n * n * space.n_elements());
    for (t, local) in locals.iter().enumerate() {
        let dofs = space.element_dofs(t);
        for a in 0..n {
            for c in 0..n {
                b.push(dofs[a], dofs[c], local[a * n + c]);
            }
        }
    }
    b.build()
}

/// `A_ij = Σ_T ∫_T K ∇φ_j · ∇φ_i` with quadrature of exactness `2p`.
pub fn assemble_stiffness(space: &FeSpace, diffusion: &Diffusion<'_>, exec: Execution) -> CsrMatrix {
    let rule = QuadratureRule::triangle(2 * space.degree());
    let tab = tabulate(space, &rule);
    let n = space.basis().len();
    let locals = par::map_range(exec, space.n_elements(), |t| {
        let geo = space.geometry(t);
        let mut local = vec![0.0; n * n];
        for (q, shapes) in tab.iter().enumerate() {
            let w = rule.weights[q] * geo.area;
            let grads: Vec<[f64; 2]> = shapes.iter().map(|s| geo.gradient(s)).collect();
            for a in 0..n {
                let kg = diffusion.apply(t, grads[a]);
                for c in a..n {
                    local[a * n + c] += w * (kg[0] * grads[c][0] + kg[1] * grads[c][1]);
                }
            }
        }
        for a in 0..n {
            for c in 0..a {
                local[a * n + c] = local[c * n + a];
            }
        }
        local
    });
    scatter(space, locals)
}

/// `M_ij = Σ_T ∫_T w φ_i φ_j` with the given rule.
pub fn assemble_mass_weighted(
    space: &FeSpace,
    rule: &QuadratureRule,
    weight: &(dyn Fn(&QuadPoint) -> f64 + Sync),
    exec: Execution,
) -> CsrMatrix {
    let tab = tabulate(space, rule);
    let n = space.basis().len();
    let locals = par::map_range(exec, space.n_elements(), |t| {
        let geo = space.geometry(t);
        let mut local = vec![0.0; n * n];
        for (q, shapes) in tab.iter().enumerate() {
            let lambda = rule.points[q];
            let qp = QuadPoint {
                element: t,
                index: q,
                x: geo.point(lambda),
                lambda,
            };
            let w = rule.weights[q] * geo.area * weight(&qp);
            if w == 0.0 {
                continue;
            }
            for a in 0..n {
                for c in a..n {
                    local[a * n + c] += w * shapes[a].value * shapes[c].value;
                }
            }
        }
        for a in 0..n {
            for c in 0..a {
                local[a * n + c] = local[c * n + a];
            }
        }
        local
    });
    scatter(space, locals)
}

/// `F_i = Σ_T ∫_T f φ_i` with the given rule.
pub fn assemble_load_scalar(
    space: &FeSpace,
    rule: &QuadratureRule,
    f: &(dyn Fn(&QuadPoint) -> f64 + Sync),
    exec: Execution,
) -> Vec<f64> {
    let tab = tabulate(space, rule);
    let n = space.basis().len();
    let locals = par::map_range(exec, space.n_elements(), |t| {
        let geo = space.geometry(t);
        let mut local = vec![0.0; n];
        for (q, shapes) in tab.iter().enumerate() {
            let lambda = rule.points[q];
            let qp = QuadPoint {
                element: t,
                index: q,
                x: geo.point(lambda),
                lambda,
            };
            let w = rule.weights[q] * geo.area * f(&qp);
            for a in 0..n {
                local[a] += w * shapes[a].value;
            }
        }
        local
    });
    let mut out = vec![0.0; space.n_dofs()];
    for (t, local) in locals.iter().enumerate() {
        for (&dof, v) in space.element_dofs(t).iter().zip(local) {
            out[dof] += v;
        }
    }
    out
}

/// `F_i = Σ_T ∫_T v · ∇φ_i` for a pointwise vector field `v`.
pub fn assemble_load_flux(
    space: &FeSpace,
    rule: &QuadratureRule,
    v: &(dyn Fn(&QuadPoint) -> [f64; 2] + Sync),
    exec: Execution,
) -> Vec<f64> {
    let tab = tabulate(space, rule);
    let n = space.basis().len();
    let locals = par::map_range(exec, space.n_elements(), |t| {
        let geo = space.geometry(t);
        let mut local = vec![0.0; n];
        for (q, shapes) in tab.iter().enumerate() {
            let lambda = rule.points[q];
            let qp = QuadPoint {
                element: t,
                index: q,
                x: geo.point(lambda),
                lambda,
            };
            let f = v(&qp);
            let w = rule.weights[q] * geo.area;
            for a in 0..n {
                let g = geo.gradient(&shapes[a]);
                local[a] += w * (f[0] * g[0] + f[1] * g[1]);
            }
        }
        local
    });
    let mut out = vec![0.0; space.n_dofs()];
    for (t, local) in locals.iter().enumerate() {
        for (&dof, v) in space.element_dofs(t).iter().zip(local) {
            out[dof] += v;
        }
    }
    out
}

/// `∫_T ∇φ_i` for every local basis function of every element.
pub fn gradient_integrals(space: &FeSpace, exec: Execution) -> Vec<Vec<[f64; 2]>> {
    let rule = QuadratureRule::triangle(space.degree().max(1));
    let tab = tabulate(space, &rule);
    par::map_range(exec, space.n_elements(), |t| {
        let geo = space.geometry(t);
        let mut local = vec![[0.0; 2]; space.basis().len()];
        for (q, shapes) in tab.iter().enumerate() {
            let w = rule.weights[q] * geo.area;
            for (l, s) in local.iter_mut().zip(shapes) {
                let g = geo.gradient(s);
                l[0] += w * g[0];
                l[1] += w * g[1];
            }
        }
        local
    })
}

/// Samples a vector field at the centroid of every element after checking it
/// is constant on each element (compared at points pulled slightly inside the corners).
pub fn elementwise_constant(
    space: &FeSpace,
    vf: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> Result<Vec<[f64; 2]>, FeError> {
    let probes = [[0.98, 0.01, 0.01], [0.01, 0.98, 0.01], [0.01, 0.01, 0.98]];
    (0..space.n_elements())
        .map(|t| {
            let geo = space.geometry(t);
            let c = vf(geo.point([1.0 / 3.0; 3]));
            for l in probes {
                let v = vf(geo.point(l));
                if (v[0] - c[0]).abs() > 1e-14 || (v[1] - c[1]).abs() > 1e-14 {
                    return Err(FeError::NotPiecewiseConstant(t));
                }
            }
            Ok(c)
        })
        .collect()
}

/// `F_i = Σ_T f|_T · ∫_T ∇φ_i` for an elementwise constant vector field.
pub fn assemble_load_gradient(
    space: &FeSpace,
    vf: &(dyn Fn(Point) -> [f64; 2] + Sync),
    exec: Execution,
) -> Result<Vec<f64>, FeError> {
    let values = elementwise_constant(space, vf)?;
    let integrals = gradient_integrals(space, exec);
    let mut out = vec![0.0; space.n_dofs()];
    for (t, (f, local)) in values.iter().zip(&integrals).enumerate() {
        for (&dof, g) in space.element_dofs(t).iter().zip(local) {
            out[dof] += f[0] * g[0] + f[1] * g[1];
        }
    }
    Ok(out)
}

/// Evaluates a coefficient vector at every point of `rule` on every element,
/// element-major.
pub fn values_at_quadrature(
    space: &FeSpace,
    coefficients: &[f64],
    rule: &QuadratureRule,
    exec: Execution,
) -> Vec<PointValue> {
    let tab = tabulate(space, rule);
    let per_elem = par::map_range(exec, space.n_elements(), |t| {
        let geo: ElementGeometry = space.geometry(t);
        let dofs = space.element_dofs(t);
        tab.iter().map(|shapes| combine(&geo, dofs, coefficients, shapes)).collect::<Vec<_>>()
    });
    per_elem.into_iter().flatten().collect()
}
