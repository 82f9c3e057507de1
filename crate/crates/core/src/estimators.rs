//! Residual error indicators, their combinations and data oscillations.
//!
//! Every estimator has the form
//! `ξ(T)² = h_T² ‖R_T‖²_{L²(T)} + h_T ‖[[J · n]]‖²_{L²(∂T ∩ Ω)}` with `h_T = |T|^{1/2}`,
//! where the volume residual `R_T` and the flux `J` are supplied by a [`Residual`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fespace::{values_at_quadrature, FeSpace, LagrangeBasis, LineRule, PointValue, QuadratureRule};
use crate::mesh::{MarkedSet, Point};
use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("indicator {index} is negative or not finite ({value})")]
    InvalidIndicator { index: usize, value: f64 },
    #[error("fields live on different meshes ({0} vs {1} elements)")]
    MeshMismatch(usize, usize),
    #[error("coefficient vector has length {got}, space has {expected} DOFs")]
    Length { got: usize, expected: usize },
    #[error("projection degree must be 0..=3, got {0}")]
    ProjectionDegree(i64),
    #[error("unknown combination mode `{0}` (expected separate, product_form or symmetric)")]
    UnknownCombination(String),
}

/// Nonnegative per-element indicators with their ℓ² aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    values: Vec<f64>,
    global: f64,
}

impl IndicatorField {
    pub fn new(values: Vec<f64>) -> Result<Self, EstimatorError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(EstimatorError::InvalidIndicator { index, value });
        }
        let global = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self { values, global })
    }

    /// Builds the field from squared indicators.
    pub fn from_squared(squared: &[f64]) -> Result<Self, EstimatorError> {
        if let Some((index, &value)) = squared.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(EstimatorError::InvalidIndicator { index, value });
        }
        Self::new(squared.iter().map(|s| s.sqrt()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, element: usize) -> f64 {
        self.values[element]
    }

    pub fn global(&self) -> f64 {
        self.global
    }

    /// `(Σ_{T∈U} ξ(T)²)^{1/2}`, summed in the order given.
    pub fn aggregate(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&t| self.values[t].powi(2)).sum::<f64>().sqrt()
    }

    pub fn aggregate_marked(&self, marked: &MarkedSet) -> f64 {
        self.aggregate(marked.indices())
    }

    /// `Σ_{T∈M} ξ(T)²` without the final square root.
    pub fn squared_marked(&self, marked: &MarkedSet) -> f64 {
        marked.indices().iter().map(|&t| self.values[t].powi(2)).sum()
    }

    pub fn squared_global(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// How the primal and dual indicators `(μ, ν)` become the pair `(η, ζ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EstimatorCombination {
    /// `(η, ζ) = (μ, ν)`.
    #[default]
    Separate,
    /// `η = μ`, `ζ = (μ² + ν²)^{1/2}`.
    ProductForm,
    /// `η = ζ = (μ² + ν²)^{1/2}`.
    Symmetric,
}

impl EstimatorCombination {
    pub const KEYS: [&'static str; 3] = ["separate", "product_form", "symmetric"];

    pub fn key(self) -> &'static str {
        match self {
            Self::Separate => "separate",
            Self::ProductForm => "product_form",
            Self::Symmetric => "symmetric",
        }
    }
}

impl fmt::Display for EstimatorCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for EstimatorCombination {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separate" => Ok(Self::Separate),
            "product_form" | "product-form" => Ok(Self::ProductForm),
            "symmetric" => Ok(Self::Symmetric),
            other => Err(EstimatorError::UnknownCombination(other.to_string())),
        }
    }
}

fn same_mesh(a: &IndicatorField, b: &IndicatorField) -> Result<(), EstimatorError> {
    if a.len() != b.len() {
        return Err(EstimatorError::MeshMismatch(a.len(), b.len()));
    }
    Ok(())
}

pub fn combine(
    mu: &IndicatorField,
    nu: &IndicatorField,
    mode: EstimatorCombination,
) -> Result<(IndicatorField, IndicatorField), EstimatorError> {
    same_mesh(mu, nu)?;
    let both = || IndicatorField::new(mu.values.iter().zip(&nu.values).map(|(m, n)| m.hypot(*n)).collect());
    Ok(match mode {
        EstimatorCombination::Separate => (mu.clone(), nu.clone()),
        EstimatorCombination::ProductForm => (mu.clone(), both()?),
        EstimatorCombination::Symmetric => {
            let s = both()?;
            (s.clone(), s)
        }
    })
}

/// `ρ(T)² = η(T)² ζ² + η² ζ(T)²`.
pub fn weighted_indicator(eta: &IndicatorField, zeta: &IndicatorField) -> Result<IndicatorField, EstimatorError> {
    same_mesh(eta, zeta)?;
    let (e2, z2) = (eta.global.powi(2), zeta.global.powi(2));
    IndicatorField::from_squared(
        &eta.values
            .iter()
            .zip(&zeta.values)
            .map(|(e, z)| e * e * z2 + e2 * z * z)
            .collect::<Vec<_>>(),
    )
}

/// A discrete field evaluated at one point of an element.
#[derive(Clone, Copy, Debug)]
pub struct ResidualPoint<'v> {
    pub x: Point,
    pub element: usize,
    /// One entry per coefficient vector passed to [`estimate_residual`].
    pub fields: &'v [PointValue],
}

type VolumeFn<'a> = Box<dyn Fn(&ResidualPoint<'_>) -> f64 + Sync + 'a>;
type FluxFn<'a> = Box<dyn Fn(&ResidualPoint<'_>) -> [f64; 2] + Sync + 'a>;

/// Volume residual and flux of one residual estimator.
pub struct Residual<'a> {
    pub volume: VolumeFn<'a>,
    pub flux: FluxFn<'a>,
    /// Non-polynomial data: quadrature exactness `2p + 4` instead of `2p`.
    pub smooth_data: bool,
}

impl<'a> Residual<'a> {
    /// `-Δu = f`: volume `Δu + f`, flux `∇u`.
    pub fn poisson(f: impl Fn(Point) -> f64 + Sync + 'a, smooth_data: bool) -> Self {
        Self {
            volume: Box::new(move |p| p.fields[0].laplacian() + f(p.x)),
            flux: Box::new(|p| p.fields[0].grad),
            smooth_data,
        }
    }

    /// `-Δu = -div f⃗` with an elementwise constant field given per element:
    /// volume `Δu`, flux `∇u - f⃗`.
    pub fn gradient_load(field: Vec<[f64; 2]>) -> Self {
        Self {
            volume: Box::new(|p| p.fields[0].laplacian()),
            flux: Box::new(move |p| {
                let g = p.fields[0].grad;
                let f = field[p.element];
                [g[0] - f[0], g[1] - f[1]]
            }),
            smooth_data: false,
        }
    }
}

fn element_rule(space: &FeSpace, smooth: bool) -> QuadratureRule {
    let p = space.degree();
    QuadratureRule::triangle(if smooth { 2 * p + 4 } else { 2 * p })
}

fn edge_rule(space: &FeSpace, smooth: bool) -> LineRule {
    let p = space.degree();
    LineRule::with_exactness(if smooth { 2 * p + 4 } else { 2 * p })
}

/// Residual indicators for the discrete fields `fields` (full coefficient vectors).
pub fn estimate_residual(
    space: &FeSpace,
    fields: &[&[f64]],
    form: &Residual<'_>,
    exec: Execution,
) -> Result<IndicatorField, EstimatorError> {
    for f in fields {
        if f.len() != space.n_dofs() {
            return Err(EstimatorError::Length {
                got: f.len(),
                expected: space.n_dofs(),
            });
        }
    }
    let rule = element_rule(space, form.smooth_data);
    let nq = rule.len();
    let at_quad: Vec<Vec<PointValue>> = fields
        .iter()
        .map(|c| values_at_quadrature(space, c, &rule, exec))
        .collect();

    let volume = par::map_range(exec, space.n_elements(), |t| {
        let geo = space.geometry(t);
        let mut sum = 0.0;
        let mut vals = vec![PointValue::default(); fields.len()];
        for q in 0..nq {
            for (v, f) in vals.iter_mut().zip(&at_quad) {
                *v = f[t * nq + q];
            }
            let p = ResidualPoint {
                x: geo.point(rule.points[q]),
                element: t,
                fields: &vals,
            };
            sum += rule.weights[q] * (form.volume)(&p).powi(2);
        }
        sum * geo.area
    });

    let jumps = edge_jumps(space, fields, form, exec);
    let topo = space.topology();
    let squared: Vec<f64> = (0..space.n_elements())
        .map(|t| {
            let area = space.mesh().area(t);
            let h = area.sqrt();
            let edges: f64 = topo.element_edges[t].iter().map(|&e| jumps[e]).sum();
            area * volume[t] + h * edges
        })
        .collect();
    IndicatorField::from_squared(&squared)
}

/// `‖[[J · n]]‖²_{L²(E)}` for every edge; zero on the boundary.
fn edge_jumps(space: &FeSpace, fields: &[&[f64]], form: &Residual<'_>, exec: Execution) -> Vec<f64> {
    let topo = space.topology();
    let mesh = space.mesh();
    let line = edge_rule(space, form.smooth_data);
    par::map_range(exec, topo.edges.len(), |e| {
        let (t1, Some(t2)) = topo.edge_elements[e] else {
            return 0.0;
        };
        let [a, b] = topo.edges[e];
        let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let (dx, dy) = (xb[0] - xa[0], xb[1] - xa[1]);
        let len = dx.hypot(dy);
        let n = [dy / len, -dx / len];
        let side = |t: usize, s: f64| -> [f64; 2] {
            let tri = mesh.triangles()[t];
            let mut lambda = [0.0; 3];
            for k in 0..3 {
                if tri[k] == a {
                    lambda[k] = 1.0 - s;
                } else if tri[k] == b {
                    lambda[k] = s;
                }
            }
            let vals: Vec<PointValue> = fields
                .iter()
                .map(|c| crate::fespace::eval_coefficients(space, c, t, &[lambda])[0])
                .collect();
            let x = [xa[0] + s * dx, xa[1] + s * dy];
            (form.flux)(&ResidualPoint {
                x,
                element: t,
                fields: &vals,
            })
        };
        let mut sum = 0.0;
        for (&s, &w) in line.points.iter().zip(&line.weights) {
            let (f1, f2) = (side(t1, s), side(t2, s));
            let j = (f1[0] - f2[0]) * n[0] + (f1[1] - f2[1]) * n[1];
            sum += w * j * j;
        }
        sum * len
    })
}

/// Squared elementwise oscillations `|T| ‖(1 - Π^q_T) D‖²_{L²(T)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillationField {
    squared: Vec<f64>,
}

impl OscillationField {
    pub fn squared(&self) -> &[f64] {
        &self.squared
    }

    pub fn total(&self) -> f64 {
        self.squared.iter().sum::<f64>().sqrt()
    }

    /// `(Σ_{T∈U} osc(T)²)^{1/2}`.
    pub fn aggregate(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&t| self.squared[t]).sum::<f64>().sqrt()
    }
}

/// Oscillation of scalar data against elementwise polynomials of degree `q`.
pub fn oscillation(
    space: &FeSpace,
    data: &(dyn Fn(Point) -> f64 + Sync),
    q: i64,
    exec: Execution,
) -> Result<OscillationField, EstimatorError> {
    if !(0..=3).contains(&q) {
        return Err(EstimatorError::ProjectionDegree(q));
    }
    let q = q as usize;
    let rule = QuadratureRule::triangle(2 * q + 8);
    // Local basis of P_q in barycentric form; q = 0 is the constant.
    let shapes: Vec<Vec<f64>> = if q == 0 {
        vec![vec![1.0]; rule.len()]
    } else {
        let b = LagrangeBasis::new(q);
        rule.points.iter().map(|&l| b.eval(l).iter().map(|s| s.value).collect()).collect()
    };
    let n = shapes[0].len();
    // Reference mass matrix (the factor |T| cancels in the projection).
    let mut mass = DMatrix::<f64>::zeros(n, n);
    for (w, s) in rule.weights.iter().zip(&shapes) {
        for i in 0..n {
            for j in 0..n {
                mass[(i, j)] += w * s[i] * s[j];
            }
        }
    }
    let chol = mass.cholesky().expect("reference mass matrix is SPD");
    let squared = par::map_range(exec, space.n_elements(), |t| {
        let geo = space.geometry(t);
        let d: Vec<f64> = rule.points.iter().map(|&l| data(geo.point(l))).collect();
        let mut rhs = DVector::<f64>::zeros(n);
        for ((w, s), dv) in rule.weights.iter().zip(&shapes).zip(&d) {
            for i in 0..n {
                rhs[i] += w * s[i] * dv;
            }
        }
        let c = chol.solve(&rhs);
        let mut err = 0.0;
        for ((w, s), dv) in rule.weights.iter().zip(&shapes).zip(&d) {
            let proj: f64 = (0..n).map(|i| c[i] * s[i]).sum();
            err += w * (dv - proj).powi(2);
        }
        geo.area * geo.area * err
    });
    Ok(OscillationField { squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Triangulation;

    fn field(v: &[f64]) -> IndicatorField {
        IndicatorField::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_data_zero_indicators() {
        let space = FeSpace::new(Triangulation::unit_square().uniform_refine(2), 2).unwrap();
        let u = vec![0.0; space.n_dofs()];
        let est = estimate_residual(&space, &[&u], &Residual::poisson(|_| 0.0, false), Execution::default()).unwrap();
        assert!(est.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_load_on_two_triangles() {
        let space = FeSpace::new(Triangulation::unit_square(), 1).unwrap();
        let u = vec![0.0; space.n_dofs()];
        let est = estimate_residual(&space, &[&u], &Residual::poisson(|_| 1.0, false), Execution::default()).unwrap();
        for &v in est.values() {
            assert!((v * v - 0.25).abs() < 1e-15);
        }
        assert!((est.global() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn interpolated_linear_function_has_only_jumps() {
        // u = x on a mesh: gradient continuous, so jumps vanish; Δu = 0.
        let space = FeSpace::new(Triangulation::unit_square().uniform_refine(3), 1).unwrap();
        let u = space.interpolate(|x| x[0]).into_coefficients();
        let est = estimate_residual(&space, &[&u], &Residual::poisson(|_| 0.0, false), Execution::default()).unwrap();
        assert!(est.global() < 1e-13);
    }

    #[test]
    fn parallel_matches_sequential() {
        let space = FeSpace::new(Triangulation::l_shape().uniform_refine(3), 3).unwrap();
        let u = space.interpolate(|x| (3.0 * x[0]).sin() * x[1]).into_coefficients();
        let form = Residual::poisson(|x| x[0].exp(), true);
        let a = estimate_residual(&space, &[&u], &form, Execution::Sequential).unwrap();
        let b = estimate_residual(&space, &[&u], &form, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn combination_modes() {
        let (mu, nu) = (field(&[3.0]), field(&[4.0]));
        let (e, z) = combine(&mu, &nu, EstimatorCombination::Symmetric).unwrap();
        assert_eq!((e.get(0), z.get(0)), (5.0, 5.0));
        let (e, z) = combine(&mu, &nu, EstimatorCombination::Separate).unwrap();
        assert_eq!((e, z), (mu.clone(), nu.clone()));

        let (mu, nu) = (field(&[1.0, 0.5, 2.0]), field(&[0.3, 0.7, 0.1]));
        let (e, z) = combine(&mu, &nu, EstimatorCombination::ProductForm).unwrap();
        let want = mu.global() * (mu.global().powi(2) + nu.global().powi(2)).sqrt();
        assert!((e.global() * z.global() - want).abs() <= 1e-13 * want);
        assert!(combine(&mu, &field(&[1.0]), EstimatorCombination::Symmetric).is_err());
        assert_eq!("product_form".parse::<EstimatorCombination>().unwrap(), EstimatorCombination::ProductForm);
    }

    #[test]
    fn weighted_indicator_arithmetic() {
        let rho = weighted_indicator(&field(&[1.0, 2.0, 2.0]), &field(&[2.0, 1.0, 2.0])).unwrap();
        assert!((rho.get(0).powi(2) - 45.0).abs() < 1e-12);
        let rho = weighted_indicator(&field(&[1.0]), &field(&[1.0])).unwrap();
        assert!((rho.get(0).powi(2) - 2.0).abs() < 1e-15);
        let rho = weighted_indicator(&field(&[1.0, 3.0]), &field(&[0.0, 0.0])).unwrap();
        assert!(rho.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_entries_rejected() {
        assert!(IndicatorField::new(vec![1.0, -1e-300]).is_err());
        assert!(IndicatorField::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn oscillation_of_constant_and_linear_data() {
        let space = FeSpace::new(Triangulation::unit_square().uniform_refine(2), 1).unwrap();
        let osc = oscillation(&space, &|_| 3.5, 0, Execution::default()).unwrap();
        assert!(osc.squared().iter().all(|&v| v.abs() < 1e-28));
        let osc = oscillation(&space, &|x| x[0] - 2.0 * x[1], 1, Execution::default()).unwrap();
        assert!(osc.total() < 1e-14);

        // Reference triangle: ∫(x - x̄)² = |T| (Σx_i² - Σx_i x_j) / 18 = 1/36.
        let t = Triangulation::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![]).unwrap();
        let space = FeSpace::new(t, 1).unwrap();
        let osc = oscillation(&space, &|x| x[0], 0, Execution::default()).unwrap();
        assert!((osc.squared()[0] - 0.5 / 36.0).abs() < 1e-15);
        assert!(oscillation(&space, &|x| x[0], -1, Execution::default()).is_err());
    }
}
