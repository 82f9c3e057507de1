//! Command-line front end for adaptive runs, figure bundles and verification suites.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use goafem::driver::{fit_rate, run_goafem, ConvergenceRecord, DriverError, RunConfig};
use goafem::figures::{figure_runs, FIGURES};
use goafem::problems::ProblemError;
use goafem::verify::{run_suite, SuiteReport, SUITES};

pub use config::NamedConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => 2,
            Self::Config(_) => 3,
            Self::Numerical(_) => 4,
        }
    }
}

fn classify(run: &str, path: &Path, e: DriverError) -> CliError {
    match e {
        DriverError::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        DriverError::Config(_) | DriverError::Problem(ProblemError::UnknownProblem { .. }) => {
            CliError::Config(format!("run `{run}`: {e}"))
        }
        e => CliError::Numerical(format!("run `{run}`: {e}")),
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub name: String,
    pub path: PathBuf,
    pub records: Vec<ConvergenceRecord>,
}

impl RunSummary {
    pub fn rate(&self) -> Option<f64> {
        fit_rate(&self.records, 0.5).ok()
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Runs every configuration, writing `<out>/<name>.csv`; results keep the input order.
pub fn execute(runs: Vec<NamedConfig>, out: &Path, jobs: Option<usize>) -> Result<Vec<RunSummary>, CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let results: Vec<Result<RunSummary, CliError>> = pool(jobs)?.install(|| {
        runs.into_par_iter()
            .map(|run| {
                let path = out.join(format!("{}.csv", run.name));
                let config = RunConfig {
                    output: Some(path.clone()),
                    ..run.config
                };
                let records = run_goafem(&config).map_err(|e| classify(&run.name, &path, e))?;
                Ok(RunSummary {
                    name: run.name,
                    path,
                    records,
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

pub fn summary_table(runs: &[RunSummary]) -> String {
    let width = runs.iter().map(|r| r.name.len()).max().unwrap_or(3).max(3);
    let mut s = format!("{:width$}  {:>5}  {:>12}  {:>14}  {:>7}\n", "run", "level", "cum. dofs", "eta*zeta", "alpha");
    for r in runs {
        let last = r.records.last().expect("every run records level 0");
        let rate = r.rate().map_or_else(|| "n/a".to_string(), |a| format!("{a:.3}"));
        let _ = writeln!(
            s,
            "{:width$}  {:>5}  {:>12}  {:>14.6e}  {:>7}",
            r.name, last.level, last.cumulative_dofs, last.estimator, rate
        );
    }
    s
}

fn apply_theta(runs: &mut [NamedConfig], theta: Option<f64>) -> Result<(), CliError> {
    if let Some(t) = theta {
        for r in runs.iter_mut() {
            r.config.theta = t;
            r.config
                .validate()
                .map_err(|e| CliError::Config(format!("--theta {t}: {e}")))?;
        }
    }
    Ok(())
}

pub fn cmd_run(path: &Path, out: &Path, jobs: Option<usize>, theta: Option<f64>) -> Result<Vec<RunSummary>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let mut runs = config::parse(&text, stem)?;
    apply_theta(&mut runs, theta)?;
    execute(runs, out, jobs)
}

pub fn cmd_figures(
    which: &str,
    out: &Path,
    jobs: Option<usize>,
    theta: Option<f64>,
    max_cumulative_dofs: usize,
) -> Result<Vec<RunSummary>, CliError> {
    let runs = figure_runs(which, theta.unwrap_or(0.5), max_cumulative_dofs).ok_or_else(|| {
        let hint = config::suggest(which, FIGURES).map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default();
        CliError::Config(format!("unknown figure `{which}`{hint}; valid: {}", FIGURES.join(", ")))
    })?;
    let mut runs: Vec<NamedConfig> = runs
        .into_iter()
        .map(|r| NamedConfig {
            name: r.name,
            config: r.config,
        })
        .collect();
    apply_theta(&mut runs, theta)?;
    execute(runs, out, jobs)
}

/// Runs one suite, or all of them for `all`.
pub fn cmd_verify(suite: &str, seed: u64) -> Result<Vec<SuiteReport>, CliError> {
    if suite == "all" {
        return Ok(SUITES.iter().map(|s| run_suite(s, seed).expect("listed suite")).collect());
    }
    run_suite(suite, seed).map(|r| vec![r]).ok_or_else(|| {
        let hint = config::suggest(suite, SUITES).map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default();
        CliError::Config(format!("unknown suite `{suite}`{hint}; valid: {}, all", SUITES.join(", ")))
    })
}
