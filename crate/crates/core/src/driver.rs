//! The adaptive loop: SOLVE, ESTIMATE, MARK, REFINE.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

use crate::estimators::{combine, EstimatorCombination, IndicatorField};
use crate::fespace::{FeError, FeSpace};
use crate::marking::{mark_goafem, MarkRequest, MarkingError, Strategy};
use crate::mesh::{Bisections, MarkedSet, MeshError, Triangulation};
use crate::problems::{problem_by_name, GoalProblem, ProblemError, PROBLEM_NAMES};
use crate::solver::SolverOptions;

pub const CSV_HEADER: &str = "level,nElements,dofs,cumulativeDofs,eta,zeta,estimator,goalValue,nMarked";

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Marking(#[from] MarkingError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error("writing records: {0}")]
    Io(#[from] std::io::Error),
    #[error("level {0}: nonzero estimator but nothing was marked")]
    EmptyMarking(usize),
    #[error("rate fit needs at least 4 records in the window, got {0}")]
    TooFewRecords(usize),
    #[error("rate fit window has identical abscissae")]
    DegenerateWindow,
    #[error("level {level}: estimator product is zero but the goal error is {error:e}")]
    GoalBoundViolated { level: usize, error: f64 },
}

/// Parameters of one adaptive run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: String,
    pub degree: usize,
    pub theta: f64,
    pub strategy: String,
    /// Overrides the problem's own combination mode.
    pub combination: Option<EstimatorCombination>,
    pub max_cumulative_dofs: usize,
    pub max_levels: Option<usize>,
    /// Stop once `η ζ` falls below this value.
    pub estimator_floor: f64,
    pub output: Option<PathBuf>,
    pub solver: SolverOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "manufactured".into(),
            degree: 1,
            theta: 0.5,
            strategy: "doerfler-smaller".into(),
            combination: None,
            max_cumulative_dofs: 300_000,
            max_levels: None,
            estimator_floor: 1e-12,
            output: None,
            solver: SolverOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<MarkRequest, DriverError> {
        if !PROBLEM_NAMES.contains(&self.problem.as_str()) {
            return Err(DriverError::Config(format!(
                "unknown problem `{}`; valid names: {}",
                self.problem,
                PROBLEM_NAMES.join(", ")
            )));
        }
        if !(1..=3).contains(&self.degree) {
            return Err(DriverError::Config(format!("degree must be 1, 2 or 3, got {}", self.degree)));
        }
        Ok(MarkRequest::new(Strategy::from_key(&self.strategy)?, self.theta)?)
    }
}

/// Solver statistics of one level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveSummary {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub newton_iterations: usize,
    pub wall_time: Duration,
}

/// One row of the convergence history.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceRecord {
    pub level: usize,
    pub n_elements: usize,
    pub dofs: usize,
    pub cumulative_dofs: usize,
    pub eta: f64,
    pub zeta: f64,
    /// `η ζ`.
    pub estimator: f64,
    pub goal_value: f64,
    pub n_marked: usize,
    pub solve: SolveSummary,
}

impl ConvergenceRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{:e},{:e},{:e},{}",
            self.level,
            self.n_elements,
            self.dofs,
            self.cumulative_dofs,
            self.eta,
            self.zeta,
            self.estimator,
            self.goal_value,
            self.n_marked
        )
    }
}

/// Everything computed on one level, handed to observers.
pub struct LevelData<'a> {
    pub record: &'a ConvergenceRecord,
    pub space: &'a FeSpace,
    pub primal: &'a [f64],
    pub dual: &'a [f64],
    pub mu: &'a IndicatorField,
    pub nu: &'a IndicatorField,
    pub eta: &'a IndicatorField,
    pub zeta: &'a IndicatorField,
    pub marked: &'a MarkedSet,
}

/// Runs the adaptive loop for the configured problem and writes the CSV file if requested.
pub fn run_goafem(config: &RunConfig) -> Result<Vec<ConvergenceRecord>, DriverError> {
    config.validate()?;
    let problem = problem_by_name(&config.problem, config.combination)?;
    match &config.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            run_problem(problem.as_ref(), config, Some(&mut file), &mut |_| {})
        }
        None => run_problem(problem.as_ref(), config, None, &mut |_| {}),
    }
}

/// The adaptive loop for an explicit problem, starting from its initial mesh.
pub fn run_problem(
    problem: &dyn GoalProblem,
    config: &RunConfig,
    csv: Option<&mut dyn Write>,
    observer: &mut dyn FnMut(&LevelData<'_>),
) -> Result<Vec<ConvergenceRecord>, DriverError> {
    run_from_mesh(problem, problem.initial_mesh(), config, csv, observer)
}

pub fn run_from_mesh(
    problem: &dyn GoalProblem,
    initial: Triangulation,
    config: &RunConfig,
    mut csv: Option<&mut dyn Write>,
    observer: &mut dyn FnMut(&LevelData<'_>),
) -> Result<Vec<ConvergenceRecord>, DriverError> {
    let request = config.validate()?;
    let exec = config.solver.exec;
    let combination = config.combination.unwrap_or_else(|| problem.combination());
    if let Some(w) = csv.as_deref_mut() {
        writeln!(w, "{CSV_HEADER}")?;
        w.flush()?;
    }

    let mut records = Vec::new();
    let mut mesh = initial;
    let mut previous: Option<(FeSpace, Vec<f64>)> = None;
    let mut cumulative = 0;
    for level in 0.. {
        let space = FeSpace::new(mesh, config.degree)?;
        let guess = match &previous {
            Some((old, u)) if problem.uses_initial_guess() => {
                Some(old.function(u.clone())?.prolongate(&space)?.into_coefficients())
            }
            _ => None,
        };
        let (u, z) = problem.solve(&space, guess.as_deref(), config.solver)?;
        let (mu, nu) = problem.estimate(&space, &u.coefficients, &z.coefficients, exec)?;
        let (eta, zeta) = combine(&mu, &nu, combination).map_err(ProblemError::from)?;
        let goal_value = problem.goal(&space, &u.coefficients, exec);
        cumulative += space.dim();
        let estimator = eta.global() * zeta.global();

        let stop = estimator == 0.0
            || estimator < config.estimator_floor
            || config.max_levels.is_some_and(|m| level >= m)
            || cumulative >= config.max_cumulative_dofs;
        let marked = if stop {
            MarkedSet::empty()
        } else {
            let m = mark_goafem(&eta, &zeta, &request)?;
            if m.is_empty() {
                return Err(DriverError::EmptyMarking(level));
            }
            m
        };

        let record = ConvergenceRecord {
            level,
            n_elements: space.n_elements(),
            dofs: space.dim(),
            cumulative_dofs: cumulative,
            eta: eta.global(),
            zeta: zeta.global(),
            estimator,
            goal_value,
            n_marked: marked.len(),
            solve: SolveSummary {
                primal_residual: u.report.relative_residual,
                dual_residual: z.report.relative_residual,
                newton_iterations: u.newton_iterations,
                wall_time: u.report.wall_time + z.report.wall_time,
            },
        };
        if let Some(w) = csv.as_deref_mut() {
            writeln!(w, "{}", record.csv_row())?;
            w.flush()?;
        }
        observer(&LevelData {
            record: &record,
            space: &space,
            primal: &u.coefficients,
            dual: &z.coefficients,
            mu: &mu,
            nu: &nu,
            eta: &eta,
            zeta: &zeta,
            marked: &marked,
        });
        records.push(record);
        if stop {
            break;
        }
        mesh = space.mesh().refine_nvb(&marked, Bisections::One)?;
        previous = Some((space, u.coefficients));
    }
    Ok(records)
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64, DriverError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DriverError::DegenerateWindow);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Slope of `log(η ζ)` over `log(cumulative DOFs)` on the trailing `window`
/// fraction of the records.
pub fn fit_rate(records: &[ConvergenceRecord], window: f64) -> Result<f64, DriverError> {
    let k = ((window.clamp(0.0, 1.0) * records.len() as f64).ceil() as usize).min(records.len());
    if k < 4 {
        return Err(DriverError::TooFewRecords(k));
    }
    let tail = &records[records.len() - k..];
    if tail.iter().any(|r| r.estimator <= 0.0) {
        return Err(DriverError::Config("rate fit needs positive estimator products".into()));
    }
    let xs: Vec<f64> = tail.iter().map(|r| (r.cumulative_dofs as f64).ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.estimator.ln()).collect();
    least_squares_slope(&xs, &ys)
}

/// Per-level ratios `|G - G_ℓ| / (η_ℓ ζ_ℓ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalBound {
    pub ratios: Vec<f64>,
    pub max: f64,
}

pub fn verify_goal_bound(records: &[ConvergenceRecord], exact_goal: f64) -> Result<GoalBound, DriverError> {
    let mut ratios = Vec::with_capacity(records.len());
    for r in records {
        let error = (exact_goal - r.goal_value).abs();
        if r.estimator == 0.0 {
            if error > 1e-14 * exact_goal.abs().max(1.0) {
                return Err(DriverError::GoalBoundViolated { level: r.level, error });
            }
            ratios.push(0.0);
        } else {
            ratios.push(error / r.estimator);
        }
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(GoalBound { ratios, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn synthetic(products: impl Fn(f64) -> f64, n: usize) -> Vec<ConvergenceRecord> {
        (0..n)
            .map(|l| {
                let c = 100 * 2usize.pow(l as u32);
                ConvergenceRecord {
                    level: l,
                    n_elements: c,
                    dofs: c,
                    cumulative_dofs: c,
                    eta: 1.0,
                    zeta: 1.0,
                    estimator: products(c as f64),
                    goal_value: 0.0,
                    n_marked: 0,
                    solve: SolveSummary::default(),
                }
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let r = synthetic(|x| 3.0 * x.powi(-2), 12);
        assert!((fit_rate(&r, 0.5).unwrap() + 2.0).abs() < 1e-10);
        let r = synthetic(|_| 0.7, 12);
        assert!(fit_rate(&r, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let noise: Vec<f64> = (0..20).map(|_| 1.0 + 0.01 * rng.random_range(-1.0..1.0)).collect();
        let mut r = synthetic(|x| x.powi(-2), 20);
        for (rec, e) in r.iter_mut().zip(&noise) {
            rec.estimator *= e;
        }
        assert!((fit_rate(&r, 1.0).unwrap() + 2.0).abs() < 0.05);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_rate(&synthetic(|x| 1.0 / x, 3), 1.0), Err(DriverError::TooFewRecords(3))));
        let mut r = synthetic(|x| 1.0 / x, 5);
        for rec in &mut r {
            rec.cumulative_dofs = 10;
        }
        assert!(matches!(fit_rate(&r, 1.0), Err(DriverError::DegenerateWindow)));
    }

    #[test]
    fn goal_bound_ratios() {
        let mut r = synthetic(|x| 1.0 / x, 3);
        r[1].goal_value = 2.0;
        let b = verify_goal_bound(&r, 2.0).unwrap();
        assert_eq!(b.ratios[1], 0.0);
        r[2].estimator = 0.0;
        assert!(matches!(verify_goal_bound(&r, 2.0), Err(DriverError::GoalBoundViolated { level: 2, .. })));
    }

    #[test]
    fn single_level_run() {
        let cfg = RunConfig {
            max_levels: Some(0),
            ..Default::default()
        };
        let r = run_goafem(&cfg).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].n_marked, 0);
        assert!(r[0].estimator > 0.0);
    }

    #[test]
    fn ms_linear_ten_levels() {
        let cfg = RunConfig {
            problem: "ms-linear".into(),
            max_levels: Some(10),
            ..Default::default()
        };
        let r = run_goafem(&cfg).unwrap();
        assert_eq!(r.len(), 11);
        for w in r.windows(2) {
            assert!(w[1].cumulative_dofs > w[0].cumulative_dofs);
            assert!(w[1].n_elements >= w[0].n_elements);
        }
        assert!(r.iter().all(|x| x.estimator > 0.0));
        for x in &r {
            assert!((x.estimator - x.eta * x.zeta).abs() <= 1e-13 * x.estimator);
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = |f: fn(&mut RunConfig)| {
            let mut c = RunConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.degree = 4));
        assert!(bad(|c| c.theta = 0.0));
        assert!(bad(|c| c.strategy = "nope".into()));
        assert!(bad(|c| c.problem = "nope".into()));
    }
}
