//! Concrete goal-oriented model problems.
//!
//! A [`GoalProblem`] knows its initial mesh, how to compute the primal and dual
//! discrete solutions on a given space, how to evaluate the primal and dual
//! residual indicators `(μ, ν)` and the discrete goal value.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::estimators::{estimate_residual, EstimatorCombination, EstimatorError, IndicatorField, Residual};
use crate::fespace::{
    assemble_load_flux, assemble_load_gradient, assemble_load_scalar, assemble_mass_weighted, assemble_stiffness,
    elementwise_constant, values_at_quadrature, Diffusion, FeError, FeSpace, QuadratureRule,
};
use crate::mesh::{MeshError, Point, Triangulation};
use crate::par::Execution;
use crate::solver::{
    newton_semilinear, FieldFn, ScalarFn, SemilinearData, SolveReport, SolverError, SolverOptions, SpdSolver,
};
use crate::sparse::{dot, CsrMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("{0}")]
    DataNotResolved(String),
    #[error("unknown problem `{name}`; valid names: {}", valid.join(", "))]
    UnknownProblem { name: String, valid: Vec<String> },
}

/// A discrete solution with solver statistics.
#[derive(Clone, Debug)]
pub struct Solved {
    /// Full coefficient vector (Dirichlet entries zero).
    pub coefficients: Vec<f64>,
    pub report: SolveReport,
    /// Newton steps; zero for linear problems.
    pub newton_iterations: usize,
}

pub trait GoalProblem: Send + Sync {
    fn name(&self) -> &str;

    fn initial_mesh(&self) -> Triangulation;

    /// Default way of turning `(μ, ν)` into `(η, ζ)`.
    fn combination(&self) -> EstimatorCombination;

    /// Primal solution; `guess` is a full coefficient vector on `space`.
    fn solve_primal(&self, space: &FeSpace, guess: Option<&[f64]>, opts: SolverOptions) -> Result<Solved, ProblemError>;

    /// Dual solution; may depend on the primal solution.
    fn solve_dual(&self, space: &FeSpace, primal: &[f64], opts: SolverOptions) -> Result<Solved, ProblemError>;

    /// Primal followed by dual solve. Implementations may share work between
    /// the two, but must return the same vectors as the separate calls.
    fn solve(
        &self,
        space: &FeSpace,
        guess: Option<&[f64]>,
        opts: SolverOptions,
    ) -> Result<(Solved, Solved), ProblemError> {
        let u = self.solve_primal(space, guess, opts)?;
        let z = self.solve_dual(space, &u.coefficients, opts)?;
        Ok((u, z))
    }

    /// Residual indicators `(μ, ν)` of the primal and dual solutions.
    fn estimate(
        &self,
        space: &FeSpace,
        primal: &[f64],
        dual: &[f64],
        exec: Execution,
    ) -> Result<(IndicatorField, IndicatorField), ProblemError>;

    /// Discrete goal value `G_H`.
    fn goal(&self, space: &FeSpace, primal: &[f64], exec: Execution) -> f64;

    fn exact_goal(&self) -> Option<f64> {
        None
    }

    /// Whether `solve_primal` benefits from the previous level's solution.
    fn uses_initial_guess(&self) -> bool {
        false
    }
}

pub const PROBLEM_NAMES: [&str; 4] = ["ms-linear", "lshape-quadratic", "semilinear", "manufactured"];

/// Looks up a problem by its configuration name.
pub fn problem_by_name(
    name: &str,
    combination: Option<EstimatorCombination>,
) -> Result<Box<dyn GoalProblem>, ProblemError> {
    let mut p: Box<dyn GoalProblem> = match name {
        "ms-linear" => Box::new(MsLinear::new()?),
        "lshape-quadratic" => Box::new(LShapeQuadratic::new(EstimatorCombination::ProductForm)),
        "semilinear" => Box::new(Semilinear::default()),
        "manufactured" => Box::new(Manufactured::new()),
        other => {
            return Err(ProblemError::UnknownProblem {
                name: other.to_string(),
                valid: PROBLEM_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    if let Some(c) = combination {
        p = Box::new(WithCombination { inner: p, combination: c });
    }
    Ok(p)
}

struct WithCombination {
    inner: Box<dyn GoalProblem>,
    combination: EstimatorCombination,
}

impl GoalProblem for WithCombination {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn initial_mesh(&self) -> Triangulation {
        self.inner.initial_mesh()
    }
    fn combination(&self) -> EstimatorCombination {
        self.combination
    }
    fn solve_primal(&self, space: &FeSpace, guess: Option<&[f64]>, opts: SolverOptions) -> Result<Solved, ProblemError> {
        self.inner.solve_primal(space, guess, opts)
    }
    fn solve_dual(&self, space: &FeSpace, primal: &[f64], opts: SolverOptions) -> Result<Solved, ProblemError> {
        self.inner.solve_dual(space, primal, opts)
    }
    fn solve(&self, space: &FeSpace, guess: Option<&[f64]>, opts: SolverOptions) -> Result<(Solved, Solved), ProblemError> {
        self.inner.solve(space, guess, opts)
    }
    fn estimate(
        &self,
        space: &FeSpace,
        primal: &[f64],
        dual: &[f64],
        exec: Execution,
    ) -> Result<(IndicatorField, IndicatorField), ProblemError> {
        self.inner.estimate(space, primal, dual, exec)
    }
    fn goal(&self, space: &FeSpace, primal: &[f64], exec: Execution) -> f64 {
        self.inner.goal(space, primal, exec)
    }
    fn exact_goal(&self) -> Option<f64> {
        self.inner.exact_goal()
    }
    fn uses_initial_guess(&self) -> bool {
        self.inner.uses_initial_guess()
    }
}

/// Free-DOF stiffness matrix of `-Δ`.
pub fn laplace_matrix(space: &FeSpace, exec: Execution) -> CsrMatrix {
    assemble_stiffness(space, &Diffusion::Identity, exec).restrict(space.free_index(), space.dim())
}

fn linear_solve(space: &FeSpace, matrix: &CsrMatrix, load: &[f64], opts: SolverOptions) -> Result<Solved, ProblemError> {
    let (x, report) = SpdSolver::new(matrix, opts)?.solve(&space.restrict_vector(load))?;
    Ok(Solved {
        coefficients: space.extend_vector(&x),
        report,
        newton_iterations: 0,
    })
}

/// Two right-hand sides with one factorization of the Laplacian.
fn linear_pair(space: &FeSpace, primal: &[f64], dual: &[f64], opts: SolverOptions) -> Result<(Solved, Solved), ProblemError> {
    let k = laplace_matrix(space, opts.exec);
    let solver = SpdSolver::new(&k, opts)?;
    let mut out = [primal, dual].into_iter().map(|load| -> Result<Solved, ProblemError> {
        let (x, report) = solver.solve(&space.restrict_vector(load))?;
        Ok(Solved {
            coefficients: space.extend_vector(&x),
            report,
            newton_iterations: 0,
        })
    });
    let u = out.next().expect("two loads")?;
    let z = out.next().expect("two loads")?;
    Ok((u, z))
}

fn smooth_rule(space: &FeSpace) -> QuadratureRule {
    QuadratureRule::triangle(2 * space.degree() + 4)
}

type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Poisson problem with gradient-type load and goal on the unit square:
/// `a(u, v) = ∫ f⃗·∇v`, `G(v) = ∫ g⃗·∇v` with elementwise constant `f⃗`, `g⃗`.
#[derive(Clone)]
pub struct MsLinear {
    pub f: VectorField,
    pub g: VectorField,
    mesh: Triangulation,
}

impl MsLinear {
    /// `f⃗ = (-1, 0)` on `x₁ + x₂ < 1/2`, `g⃗ = (1, 0)` on `x₁ + x₂ > 3/2`, zero elsewhere.
    pub fn new() -> Result<Self, ProblemError> {
        Self::with_fields(
            Arc::new(|x| if x[0] + x[1] < 0.5 { [-1.0, 0.0] } else { [0.0, 0.0] }),
            Arc::new(|x| if x[0] + x[1] > 1.5 { [1.0, 0.0] } else { [0.0, 0.0] }),
        )
    }

    /// Refines the unit square uniformly until both fields are elementwise constant.
    pub fn with_fields(f: VectorField, g: VectorField) -> Result<Self, ProblemError> {
        Self::with_fields_on(Triangulation::unit_square(), f, g)
    }

    pub fn with_fields_on(start: Triangulation, f: VectorField, g: VectorField) -> Result<Self, ProblemError> {
        let mut mesh = start;
        for _ in 0..=8 {
            let space = FeSpace::new(mesh.clone(), 1)?;
            if elementwise_constant(&space, &*f).is_ok() && elementwise_constant(&space, &*g).is_ok() {
                return Ok(Self { f, g, mesh });
            }
            mesh = mesh.uniform_refine(1);
        }
        Err(ProblemError::DataNotResolved(
            "the load and goal fields are not elementwise constant after 8 uniform refinements".into(),
        ))
    }

    fn loads(&self, space: &FeSpace, exec: Execution) -> Result<(Vec<f64>, Vec<f64>), ProblemError> {
        Ok((
            assemble_load_gradient(space, &*self.f, exec)?,
            assemble_load_gradient(space, &*self.g, exec)?,
        ))
    }
}

impl GoalProblem for MsLinear {
    fn name(&self) -> &str {
        "ms-linear"
    }

    fn initial_mesh(&self) -> Triangulation {
        self.mesh.clone()
    }

    fn combination(&self) -> EstimatorCombination {
        EstimatorCombination::Separate
    }

    fn solve_primal(&self, space: &FeSpace, _: Option<&[f64]>, opts: SolverOptions) -> Result<Solved, ProblemError> {
        let load = assemble_load_gradient(space, &*self.f, opts.exec)?;
        linear_solve(space, &laplace_matrix(space, opts.exec), &load, opts)
    }

    fn solve_dual(&self, space: &FeSpace, _: &[f64], opts: SolverOptions) -> Result<Solved, ProblemError> {
        let load = assemble_load_gradient(space, &*self.g, opts.exec)?;
        linear_solve(space, &laplace_matrix(space, opts.exec), &load, opts)
    }

    fn solve(&self, space: &FeSpace, _: Option<&[f64]>, opts: SolverOptions) -> Result<(Solved, Solved), ProblemError> {
        let (f, g) = self.loads(space, opts.exec)?;
        linear_pair(space, &f, &g, opts)
    }

    fn estimate(
        &self,
        space: &FeSpace,
        primal: &[f64],
        dual: &[f64],
        exec: Execution,
    ) -> Result<(IndicatorField, IndicatorField), ProblemError> {
        let mu = Residual::gradient_load(elementwise_constant(space, &*self.f)?);
        let nu = Residual::gradient_load(elementwise_constant(space, &*self.g)?);
        Ok((
            estimate_residual(space, &[primal], &mu, exec)?,
            estimate_residual(space, &[dual], &nu, exec)?,
        ))
    }

    fn goal(&self, space: &FeSpace, primal: &[f64], exec: Execution) -> f64 {
        let g = assemble_load_gradient(space, &*self.g, exec).expect("goal field resolved by the initial mesh");
        dot(&g, primal)
    }
}

/// `λ_y(x) = (10⁻² + ‖x - y‖²)⁻¹`.
pub fn lambda_y(x: Point, y: Point) -> f64 {
    1.0 / (1e-2 + (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))
}

/// `∇λ_y(x) = -2 (x - y) λ_y(x)²`.
pub fn grad_lambda_y(x: Point, y: Point) -> [f64; 2] {
    let l = lambda_y(x, y);
    [-2.0 * (x[0] - y[0]) * l * l, -2.0 * (x[1] - y[1]) * l * l]
}

/// Poisson problem with `f = 1` on the L-shape and the quadratic goal
/// `G(u) = ½ ∫ λ_y |∇u|²`, `y = (1/2, 1/2)`. The dual problem is linearised
/// at the discrete primal solution: `a(v, z) = ∫ λ_y ∇u_H · ∇v`.
#[derive(Clone, Debug)]
pub struct LShapeQuadratic {
    pub y: Point,
    pub combination: EstimatorCombination,
}

impl LShapeQuadratic {
    pub fn new(combination: EstimatorCombination) -> Self {
        Self {
            y: [0.5, 0.5],
            combination,
        }
    }

    fn primal_load(&self, space: &FeSpace, exec: Execution) -> Vec<f64> {
        assemble_load_scalar(space, &QuadratureRule::triangle(2 * space.degree()), &|_| 1.0, exec)
    }

    fn dual_load(&self, space: &FeSpace, primal: &[f64], exec: Execution) -> Vec<f64> {
        let rule = smooth_rule(space);
        let nq = rule.len();
        let vals = values_at_quadrature(space, primal, &rule, exec);
        let y = self.y;
        assemble_load_flux(
            space,
            &rule,
            &|q| {
                let g = vals[q.element * nq + q.index].grad;
                let l = lambda_y(q.x, y);
                [l * g[0], l * g[1]]
            },
            exec,
        )
    }
}

impl GoalProblem for LShapeQuadratic {
    fn name(&self) -> &str {
        "lshape-quadratic"
    }

    fn initial_mesh(&self) -> Triangulation {
        Triangulation::l_shape()
    }

    fn combination(&self) -> EstimatorCombination {
        self.combination
    }

    fn solve_primal(&self, space: &FeSpace, _: Option<&[f64]>, opts: SolverOptions) -> Result<Solved, ProblemError> {
        linear_solve(space, &laplace_matrix(space, opts.exec), &self.primal_load(space, opts.exec), opts)
    }

    fn solve_dual(&self, space: &FeSpace, primal: &[f64], opts: SolverOptions) -> Result<Solved, ProblemError> {
        let load = self.dual_load(space, primal, opts.exec);
        linear_solve(space, &laplace_matrix(space, opts.exec), &load, opts)
    }

    fn solve(&self, space: &FeSpace, _: Option<&[f64]>, opts: SolverOptions) -> Result<(Solved, Solved), ProblemError> {
        let k = laplace_matrix(space, opts.exec);
        let solver = SpdSolver::new(&k, opts)?;
        let (x, report) = solver.solve(&space.restrict_vector(&self.primal_load(space, opts.exec)))?;
        let u = Solved {
            coefficients: space.extend_vector(&x),
            report,
            newton_iterations: 0,
        };
        let load = self.dual_load(space, &u.coefficients, opts.exec);
        let (x, report) = solver.solve(&space.restrict_vector(&load))?;
        let z = Solved {
            coefficients: space.extend_vector(&x),
            report,
            newton_iterations: 0,
        };
        Ok((u, z))
    }

    fn estimate(
        &self,
        space: &FeSpace,
        primal: &[f64],
        dual: &[f64],
        exec: Execution,
    ) -> Result<(IndicatorField, IndicatorField), ProblemError> {
        let y = self.y;
        let mu = estimate_residual(space, &[primal], &Residual::poisson(|_| 1.0, false), exec)?;
        let dual_form = Residual {
            volume: Box::new(move |p| {
                let (u, z) = (&p.fields[0], &p.fields[1]);
                let gl = grad_lambda_y(p.x, y);
                z.laplacian() - lambda_y(p.x, y) * u.laplacian() - (gl[0] * u.grad[0] + gl[1] * u.grad[1])
            }),
            flux: Box::new(move |p| {
                let (u, z) = (&p.fields[0], &p.fields[1]);
                let l = lambda_y(p.x, y);
                [z.grad[0] - l * u.grad[0], z.grad[1] - l * u.grad[1]]
            }),
            smooth_data: true,
        };
        let nu = estimate_residual(space, &[primal, dual], &dual_form, exec)?;
        Ok((mu, nu))
    }

    fn goal(&self, space: &FeSpace, primal: &[f64], exec: Execution) -> f64 {
        let rule = smooth_rule(space);
        let nq = rule.len();
        let vals = values_at_quadrature(space, primal, &rule, exec);
        let mut sum = 0.0;
        for t in 0..space.n_elements() {
            let geo = space.geometry(t);
            let mut local = 0.0;
            for q in 0..nq {
                let g = vals[t * nq + q].grad;
                local += rule.weights[q] * lambda_y(geo.point(rule.points[q]), self.y) * (g[0] * g[0] + g[1] * g[1]);
            }
            sum += geo.area * local;
        }
        0.5 * sum
    }
}

/// `-div(A∇u) + b(u) = f` with goal `G(u) = ∫ g u`; the dual problem is the
/// linearisation `∫ A∇v·∇z + b'(u_H) v z = ∫ g v`.
#[derive(Clone)]
pub struct Semilinear {
    pub data: SemilinearData,
    pub g: FieldFn,
    pub combination: EstimatorCombination,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub mesh: Triangulation,
}

impl Default for Semilinear {
    /// `A = I`, `b(s) = s³`, `f = 1`, `g` the indicator of `‖x‖ < 1/2` on the unit square.
    fn default() -> Self {
        Self::new(
            [[1.0, 0.0], [0.0, 1.0]],
            Arc::new(|s| s * s * s),
            Arc::new(|s| 3.0 * s * s),
            Arc::new(|_| 1.0),
            Arc::new(|x| if x[0].hypot(x[1]) < 0.5 { 1.0 } else { 0.0 }),
        )
    }
}

impl Semilinear {
    pub fn new(diffusion: [[f64; 2]; 2], b: ScalarFn, db: ScalarFn, f: FieldFn, g: FieldFn) -> Self {
        Self {
            data: SemilinearData { diffusion, b, db, f },
            g,
            combination: EstimatorCombination::Separate,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            mesh: Triangulation::unit_square(),
        }
    }

    fn primal_form(&self) -> Residual<'_> {
        let a = self.data.diffusion;
        Residual {
            volume: Box::new(move |p| {
                let u = &p.fields[0];
                contract(a, u.hess) - (self.data.b)(u.value) + (self.data.f)(p.x)
            }),
            flux: Box::new(move |p| apply(a, p.fields[0].grad)),
            smooth_data: true,
        }
    }

    fn dual_form(&self) -> Residual<'_> {
        let a = self.data.diffusion;
        Residual {
            volume: Box::new(move |p| {
                let (u, z) = (&p.fields[0], &p.fields[1]);
                contract(a, z.hess) - (self.data.db)(u.value) * z.value + (self.g)(p.x)
            }),
            flux: Box::new(move |p| apply(a, p.fields[1].grad)),
            smooth_data: true,
        }
    }
}

fn contract(a: [[f64; 2]; 2], h: [[f64; 2]; 2]) -> f64 {
    a[0][0] * h[0][0] + a[0][1] * h[0][1] + a[1][0] * h[1][0] + a[1][1] * h[1][1]
}

fn apply(a: [[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]]
}

impl GoalProblem for Semilinear {
    fn name(&self) -> &str {
        "semilinear"
    }

    fn uses_initial_guess(&self) -> bool {
        true
    }

    fn initial_mesh(&self) -> Triangulation {
        self.mesh.clone()
    }

    fn combination(&self) -> EstimatorCombination {
        self.combination
    }

    fn solve_primal(&self, space: &FeSpace, guess: Option<&[f64]>, opts: SolverOptions) -> Result<Solved, ProblemError> {
        let zero;
        let init = match guess {
            Some(g) => g,
            None => {
                zero = vec![0.0; space.n_dofs()];
                &zero
            }
        };
        let (u, rep) = newton_semilinear(space, &self.data, init, self.newton_tol, self.newton_max_iter, opts)?;
        let report = rep.linear.last().cloned().unwrap_or(SolveReport {
            iterations: 0,
            relative_residual: 0.0,
            wall_time: Default::default(),
        });
        Ok(Solved {
            coefficients: u,
            report: SolveReport {
                relative_residual: rep.residuals.last().copied().unwrap_or(0.0),
                ..report
            },
            newton_iterations: rep.iterations,
        })
    }

    fn solve_dual(&self, space: &FeSpace, primal: &[f64], opts: SolverOptions) -> Result<Solved, ProblemError> {
        let exec = opts.exec;
        let rule = smooth_rule(space);
        let nq = rule.len();
        let vals = values_at_quadrature(space, primal, &rule, exec);
        for (i, v) in vals.iter().enumerate() {
            let d = (self.data.db)(v.value);
            if d < 0.0 || !d.is_finite() {
                return Err(SolverError::NonMonotone {
                    element: i / nq,
                    value: d,
                }
                .into());
            }
        }
        let (free, n) = (space.free_index(), space.dim());
        let k = assemble_stiffness(space, &Diffusion::Matrix(self.data.diffusion), exec).restrict(free, n);
        let db = &self.data.db;
        let m = assemble_mass_weighted(space, &rule, &|q| db(vals[q.element * nq + q.index].value), exec)
            .restrict(free, n);
        let g = &self.g;
        let load = assemble_load_scalar(space, &rule, &|q| g(q.x), exec);
        linear_solve(space, &k.add(&m), &load, opts)
    }

    fn estimate(
        &self,
        space: &FeSpace,
        primal: &[f64],
        dual: &[f64],
        exec: Execution,
    ) -> Result<(IndicatorField, IndicatorField), ProblemError> {
        Ok((
            estimate_residual(space, &[primal], &self.primal_form(), exec)?,
            estimate_residual(space, &[primal, dual], &self.dual_form(), exec)?,
        ))
    }

    fn goal(&self, space: &FeSpace, primal: &[f64], exec: Execution) -> f64 {
        let g = &self.g;
        dot(&assemble_load_scalar(space, &smooth_rule(space), &|q| g(q.x), exec), primal)
    }
}

/// `u = sin(πx) sin(πy)` on the unit square with the goal `G(u) = ∫ u = 4/π²`.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub mesh: Triangulation,
}

impl Default for Manufactured {
    fn default() -> Self {
        Self::new()
    }
}

impl Manufactured {
    /// Starts from the square refined uniformly three times; the 2-triangle
    /// mesh carries no interior degree of freedom for `p = 1`.
    pub fn new() -> Self {
        Self {
            mesh: Triangulation::unit_square().uniform_refine(3),
        }
    }

    pub fn exact(x: Point) -> f64 {
        (PI * x[0]).sin() * (PI * x[1]).sin()
    }

    pub fn exact_gradient(x: Point) -> [f64; 2] {
        [
            PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
            PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        ]
    }

    pub fn load(x: Point) -> f64 {
        2.0 * PI * PI * Self::exact(x)
    }

    fn loads(&self, space: &FeSpace, exec: Execution) -> (Vec<f64>, Vec<f64>) {
        let rule = smooth_rule(space);
        (
            assemble_load_scalar(space, &rule, &|q| Self::load(q.x), exec),
            assemble_load_scalar(space, &rule, &|_| 1.0, exec),
        )
    }
}

impl GoalProblem for Manufactured {
    fn name(&self) -> &str {
        "manufactured"
    }

    fn initial_mesh(&self) -> Triangulation {
        self.mesh.clone()
    }

    fn combination(&self) -> EstimatorCombination {
        EstimatorCombination::Separate
    }

    fn solve_primal(&self, space: &FeSpace, _: Option<&[f64]>, opts: SolverOptions) -> Result<Solved, ProblemError> {
        linear_solve(space, &laplace_matrix(space, opts.exec), &self.loads(space, opts.exec).0, opts)
    }

    fn solve_dual(&self, space: &FeSpace, _: &[f64], opts: SolverOptions) -> Result<Solved, ProblemError> {
        linear_solve(space, &laplace_matrix(space, opts.exec), &self.loads(space, opts.exec).1, opts)
    }

    fn solve(&self, space: &FeSpace, _: Option<&[f64]>, opts: SolverOptions) -> Result<(Solved, Solved), ProblemError> {
        let (f, g) = self.loads(space, opts.exec);
        linear_pair(space, &f, &g, opts)
    }

    fn estimate(
        &self,
        space: &FeSpace,
        primal: &[f64],
        dual: &[f64],
        exec: Execution,
    ) -> Result<(IndicatorField, IndicatorField), ProblemError> {
        Ok((
            estimate_residual(space, &[primal], &Residual::poisson(Self::load, true), exec)?,
            estimate_residual(space, &[dual], &Residual::poisson(|_| 1.0, false), exec)?,
        ))
    }

    fn goal(&self, space: &FeSpace, primal: &[f64], exec: Execution) -> f64 {
        let one = assemble_load_scalar(space, &smooth_rule(space), &|_| 1.0, exec);
        dot(&one, primal)
    }

    fn exact_goal(&self) -> Option<f64> {
        Some(4.0 / (PI * PI))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dot;

    #[test]
    fn ms_linear_data() {
        let p = MsLinear::new().unwrap();
        assert_eq!((p.f)([0.1, 0.1]), [-1.0, 0.0]);
        assert_eq!((p.g)([0.9, 0.9]), [1.0, 0.0]);
        assert_eq!((p.f)([0.9, 0.9]), [0.0, 0.0]);
        let space = FeSpace::new(p.initial_mesh(), 1).unwrap();
        assert_eq!(p.goal(&space, &vec![0.0; space.n_dofs()], Execution::default()), 0.0);
        let bad = MsLinear::with_fields(Arc::new(|x| [x[0], 0.0]), Arc::new(|_| [0.0, 0.0]));
        assert!(matches!(bad, Err(ProblemError::DataNotResolved(_))));
    }

    #[test]
    fn ms_linear_discrete_duality() {
        let p = MsLinear::new().unwrap();
        let space = FeSpace::new(p.initial_mesh().uniform_refine(1), 2).unwrap();
        let (u, z) = p.solve(&space, None, SolverOptions::default()).unwrap();
        let k = laplace_matrix(&space, Execution::default());
        let (uf, zf) = (space.restrict_vector(&u.coefficients), space.restrict_vector(&z.coefficients));
        let a_uz = dot(&k.mul_vec(&zf), &uf);
        let g = p.goal(&space, &u.coefficients, Execution::default());
        assert!((a_uz - g).abs() <= 1e-10 * g.abs().max(1e-300), "{a_uz} vs {g}");
    }

    #[test]
    fn shared_factorization_matches_separate_solves() {
        let problems: Vec<Box<dyn GoalProblem>> = vec![
            Box::new(MsLinear::new().unwrap()),
            Box::new(LShapeQuadratic::new(EstimatorCombination::Symmetric)),
            Box::new(Manufactured::new()),
        ];
        for p in problems {
            let space = FeSpace::new(p.initial_mesh().uniform_refine(2), 2).unwrap();
            let opts = SolverOptions::default();
            let (u, z) = p.solve(&space, None, opts).unwrap();
            let u2 = p.solve_primal(&space, None, opts).unwrap();
            let z2 = p.solve_dual(&space, &u2.coefficients, opts).unwrap();
            assert_eq!(u.coefficients, u2.coefficients, "{}", p.name());
            assert_eq!(z.coefficients, z2.coefficients, "{}", p.name());
        }
    }

    #[test]
    fn lambda_values() {
        assert!((lambda_y([0.5, 0.5], [0.5, 0.5]) - 100.0).abs() < 1e-12);
        assert!((lambda_y([1.0, 1.0], [0.5, 0.5]) - 1.0 / 0.51).abs() < 1e-14);
        let (x, h) = ([0.3, -0.2], 1e-6);
        let g = grad_lambda_y(x, [0.5, 0.5]);
        let fd = (lambda_y([x[0] + h, x[1]], [0.5, 0.5]) - lambda_y([x[0] - h, x[1]], [0.5, 0.5])) / (2.0 * h);
        assert!((g[0] - fd).abs() < 1e-6 * g[0].abs());
        let p = LShapeQuadratic::new(EstimatorCombination::ProductForm);
        let space = FeSpace::new(p.initial_mesh(), 1).unwrap();
        assert_eq!(p.goal(&space, &vec![0.0; space.n_dofs()], Execution::default()), 0.0);
    }

    #[test]
    fn semilinear_with_zero_reaction_matches_poisson_estimator() {
        let p = Semilinear::new(
            [[1.0, 0.0], [0.0, 1.0]],
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 1.0),
            Arc::new(|_| 1.0),
        );
        let space = FeSpace::new(p.initial_mesh().uniform_refine(3), 2).unwrap();
        let opts = SolverOptions::default();
        let (u, z) = p.solve(&space, None, opts).unwrap();
        let (mu, _) = p.estimate(&space, &u.coefficients, &z.coefficients, opts.exec).unwrap();
        let poisson =
            estimate_residual(&space, &[&u.coefficients], &Residual::poisson(|_| 1.0, true), opts.exec).unwrap();
        assert_eq!(mu, poisson);
        assert_eq!((Semilinear::default().data.db)(2.0), 12.0);
    }

    #[test]
    fn manufactured_data() {
        assert!((Manufactured::load([0.5, 0.5]) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((Manufactured::new().exact_goal().unwrap() - 0.405_284_734_569_351).abs() < 1e-14);
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        match problem_by_name("poisson", None) {
            Err(ProblemError::UnknownProblem { valid, .. }) => assert_eq!(valid.len(), 4),
            _ => panic!("expected an error"),
        }
        let p = problem_by_name("lshape-quadratic", Some(EstimatorCombination::Symmetric)).unwrap();
        assert_eq!(p.combination(), EstimatorCombination::Symmetric);
    }
}
