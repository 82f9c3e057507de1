//! Linear SPD solves and the Newton iteration for monotone semilinear problems.

use std::sync::Arc;
use std::time::{Duration, Instant};

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Side};
use thiserror::Error;

use crate::fespace::{
    assemble_load_scalar, assemble_mass_weighted, assemble_stiffness, values_at_quadrature, Diffusion, FeSpace,
    QuadratureRule,
};
use crate::mesh::Point;
use crate::par::Execution;
use crate::sparse::{norm2, CsrMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("relative tolerance must lie in (0, 1), got {0}")]
    Tolerance(f64),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("conjugate gradients broke down at iteration {0} (non-positive curvature)")]
    Breakdown(usize),
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("b'(u) = {value} < 0 on element {element}: the nonlinearity is not monotone")]
    NonMonotone { element: usize, value: f64 },
    #[error("dimension mismatch: matrix {matrix}, right-hand side {rhs}")]
    Dimension { matrix: usize, rhs: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Sparse Cholesky below `direct_limit` unknowns, CG above.
    Auto { direct_limit: usize },
    Direct,
    Cg,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub method: Method,
    pub rel_tol: f64,
    pub max_cg_iterations: usize,
    pub exec: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Auto { direct_limit: 200_000 },
            rel_tol: 1e-10,
            max_cg_iterations: 100_000,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    /// Zero for direct solves (plus refinement sweeps, if any).
    pub iterations: usize,
    pub relative_residual: f64,
    pub wall_time: Duration,
}

enum Backend {
    Direct(Llt<usize, f64>),
    Cg(Vec<f64>),
}

/// A prepared SPD operator that can be applied to several right-hand sides.
pub struct SpdSolver<'a> {
    matrix: &'a CsrMatrix,
    backend: Backend,
    opts: SolverOptions,
}

impl<'a> SpdSolver<'a> {
    pub fn new(matrix: &'a CsrMatrix, opts: SolverOptions) -> Result<Self, SolverError> {
        if !(opts.rel_tol > 0.0 && opts.rel_tol < 1.0) {
            return Err(SolverError::Tolerance(opts.rel_tol));
        }
        let direct = match opts.method {
            Method::Direct => true,
            Method::Cg => false,
            Method::Auto { direct_limit } => matrix.nrows < direct_limit,
        };
        let backend = if direct && matrix.nrows > 0 {
            let mut triplets = Vec::with_capacity(matrix.nnz());
            for r in 0..matrix.nrows {
                for (c, v) in matrix.row(r) {
                    if c <= r {
                        triplets.push(Triplet::new(r, c, v));
                    }
                }
            }
            let a = SparseColMat::<usize, f64>::try_new_from_triplets(matrix.nrows, matrix.ncols, &triplets)
                .map_err(|e| SolverError::NotSpd(format!("{e:?}")))?;
            let llt = a
                .sp_cholesky(Side::Lower)
                .map_err(|e| SolverError::NotSpd(format!("{e:?}")))?;
            Backend::Direct(llt)
        } else {
            let diag = matrix.diagonal();
            if let Some(i) = diag.iter().position(|&d| d <= 0.0) {
                return Err(SolverError::NotSpd(format!("diagonal entry {i} is {}", diag[i])));
            }
            Backend::Cg(diag)
        };
        Ok(Self {
            matrix,
            backend,
            opts,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, SolveReport), SolverError> {
        let start = Instant::now();
        let n = self.matrix.nrows;
        if rhs.len() != n {
            return Err(SolverError::Dimension { matrix: n, rhs: rhs.len() });
        }
        let bnorm = norm2(rhs);
        if bnorm == 0.0 {
            return Ok((
                vec![0.0; n],
                SolveReport {
                    iterations: 0,
                    relative_residual: 0.0,
                    wall_time: start.elapsed(),
                },
            ));
        }
        let (x, iterations, res) = match &self.backend {
            Backend::Direct(llt) => self.direct(llt, rhs, bnorm)?,
            Backend::Cg(diag) => self.pcg(diag, rhs, bnorm)?,
        };
        Ok((
            x,
            SolveReport {
                iterations,
                relative_residual: res,
                wall_time: start.elapsed(),
            },
        ))
    }

    fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; x.len()];
        self.matrix.mul_vec_into(self.opts.exec, x, &mut ax);
        rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    }

    fn direct(&self, llt: &Llt<usize, f64>, rhs: &[f64], bnorm: f64) -> Result<(Vec<f64>, usize, f64), SolverError> {
        let apply = |b: &[f64]| {
            let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
            llt.solve_in_place_with_conj(Conj::No, m.as_mut());
            (0..b.len()).map(|i| m[(i, 0)]).collect::<Vec<f64>>()
        };
        let mut x = apply(rhs);
        let mut r = self.residual(&x, rhs);
        let mut rel = norm2(&r) / bnorm;
        let mut sweeps = 0;
        // Iterative refinement for badly conditioned systems.
        while rel > self.opts.rel_tol && sweeps < 3 {
            let dx = apply(&r);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            r = self.residual(&x, rhs);
            rel = norm2(&r) / bnorm;
            sweeps += 1;
        }
        if !rel.is_finite() {
            return Err(SolverError::NotSpd("non-finite solution".into()));
        }
        if rel > self.opts.rel_tol {
            return Err(SolverError::NotConverged {
                iterations: sweeps,
                residual: rel,
            });
        }
        Ok((x, sweeps, rel))
    }

    fn pcg(&self, diag: &[f64], rhs: &[f64], bnorm: f64) -> Result<(Vec<f64>, usize, f64), SolverError> {
        let n = rhs.len();
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for it in 1..=self.opts.max_cg_iterations {
            self.matrix.mul_vec_into(self.opts.exec, &p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 || !pap.is_finite() {
                return Err(SolverError::Breakdown(it));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rel = norm2(&r) / bnorm;
            if rel <= self.opts.rel_tol {
                // Confirm with the true residual.
                let true_rel = norm2(&self.residual(&x, rhs)) / bnorm;
                if true_rel <= self.opts.rel_tol {
                    return Ok((x, it, true_rel));
                }
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(SolverError::NotConverged {
            iterations: self.opts.max_cg_iterations,
            residual: norm2(&self.residual(&x, rhs)) / bnorm,
        })
    }
}

/// Solves `A x = b` for SPD `A` to `‖Ax - b‖ ≤ rel_tol ‖b‖` with the default method.
pub fn solve_spd(matrix: &CsrMatrix, rhs: &[f64], rel_tol: f64) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let opts = SolverOptions {
        rel_tol,
        ..Default::default()
    };
    SpdSolver::new(matrix, opts)?.solve(rhs)
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Data of `-div(A ∇u) + b(u) = f` with homogeneous Dirichlet conditions.
#[derive(Clone)]
pub struct SemilinearData {
    /// Constant symmetric positive definite diffusion matrix.
    pub diffusion: [[f64; 2]; 2],
    pub b: ScalarFn,
    pub db: ScalarFn,
    pub f: FieldFn,
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Nonlinear residual norms relative to `‖F‖`, starting with the initial iterate.
    pub residuals: Vec<f64>,
    pub linear: Vec<SolveReport>,
}

/// Newton's method with step halving for the semilinear Galerkin system.
///
/// `initial` is a full coefficient vector (Dirichlet entries are ignored).
pub fn newton_semilinear(
    space: &FeSpace,
    data: &SemilinearData,
    initial: &[f64],
    tol: f64,
    max_iter: usize,
    opts: SolverOptions,
) -> Result<(Vec<f64>, NewtonReport), SolverError> {
    let exec = opts.exec;
    let rule = QuadratureRule::triangle(2 * space.degree() + 4);
    let nq = rule.len();
    let free = space.free_index();
    let n = space.dim();
    let k = assemble_stiffness(space, &Diffusion::Matrix(data.diffusion), exec).restrict(free, n);
    let f = &data.f;
    let load = space.restrict_vector(&assemble_load_scalar(space, &rule, &|q| f(q.x), exec));
    let scale = {
        let s = norm2(&load);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };

    let residual = |u: &[f64]| -> Vec<f64> {
        let full = space.extend_vector(u);
        let vals = values_at_quadrature(space, &full, &rule, exec);
        let b = &data.b;
        let nonlinear = space.restrict_vector(&assemble_load_scalar(
            space,
            &rule,
            &|q| b(vals[q.element * nq + q.index].value),
            exec,
        ));
        let mut r = vec![0.0; n];
        k.mul_vec_into(exec, u, &mut r);
        for i in 0..n {
            r[i] += nonlinear[i] - load[i];
        }
        r
    };

    let mut u = space.restrict_vector(initial);
    let mut r = residual(&u);
    let mut rnorm = norm2(&r) / scale;
    let mut report = NewtonReport {
        iterations: 0,
        residuals: vec![rnorm],
        linear: Vec::new(),
    };
    while rnorm > tol {
        if report.iterations >= max_iter {
            return Err(SolverError::NotConverged {
                iterations: report.iterations,
                residual: rnorm,
            });
        }
        let full = space.extend_vector(&u);
        let vals = values_at_quadrature(space, &full, &rule, exec);
        if let Some((idx, v)) = vals
            .iter()
            .map(|pv| (data.db)(pv.value))
            .enumerate()
            .find(|&(_, d)| d < 0.0 || !d.is_finite())
        {
            return Err(SolverError::NonMonotone {
                element: idx / nq,
                value: v,
            });
        }
        let db = &data.db;
        let mass = assemble_mass_weighted(space, &rule, &|q| db(vals[q.element * nq + q.index].value), exec)
            .restrict(free, n);
        let jac = k.add(&mass);
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let (delta, rep) = SpdSolver::new(&jac, opts)?.solve(&neg_r)?;
        report.linear.push(rep);

        let mut step = 1.0;
        let (mut u_new, mut r_new, mut norm_new);
        loop {
            u_new = u.iter().zip(&delta).map(|(a, d)| a + step * d).collect::<Vec<_>>();
            r_new = residual(&u_new);
            norm_new = norm2(&r_new) / scale;
            if norm_new < rnorm || step < 1e-6 {
                break;
            }
            step *= 0.5;
        }
        u = u_new;
        r = r_new;
        rnorm = norm_new;
        report.iterations += 1;
        report.residuals.push(rnorm);
    }
    Ok((space.extend_vector(&u), report))
}
