//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line with the measured values before asserting.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use goafem::driver::fit_rate;
use goafem::verify::{axioms_suite, goal_suite, marking_suite, mesh_suite, SuiteReport};
use goafem_cli::{cmd_figures, RunSummary};

/// Slope window half-width around `-p` for the linear-goal runs.
const FIG2_HALF_WIDTH: f64 = 0.35;
/// Slope windows for the quadratic-goal runs, indexed by degree.
const FIG3_WINDOWS: [(usize, f64, f64); 2] = [(1, -1.35, -0.65), (3, -3.4, -2.6)];
/// Every run must reach this many cumulative degrees of freedom.
const MIN_CUMULATIVE_DOFS: usize = 100_000;
/// Trailing fraction of the records used for rate fits.
const RATE_WINDOW: f64 = 0.5;
const THETA: f64 = 0.5;
const SEED: u64 = 2024;
const MESH_CALLS: usize = 500;
const MARKING_FIELDS: usize = 100;

fn report(name: &str, passed: bool, detail: &str) {
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "{name}: {detail}");
}

fn figure(which: &str, dir: &Path, jobs: usize) -> Vec<RunSummary> {
    cmd_figures(which, dir, Some(jobs), Some(THETA), MIN_CUMULATIVE_DOFS).expect("figure runs complete")
}

fn fig2() -> &'static (tempfile::TempDir, Vec<RunSummary>) {
    static RUNS: OnceLock<(tempfile::TempDir, Vec<RunSummary>)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let runs = figure("fig2", dir.path(), 4);
        (dir, runs)
    })
}

fn rate_lines(runs: &[RunSummary], window: impl Fn(usize) -> Option<(f64, f64)>) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let Some((lo, hi)) = window(degree_of(&r.name)) else {
            continue;
        };
        let last = r.records.last().unwrap();
        let rate = fit_rate(&r.records, RATE_WINDOW).unwrap_or(f64::NAN);
        let good = (lo..=hi).contains(&rate) && last.cumulative_dofs >= MIN_CUMULATIVE_DOFS;
        ok &= good;
        parts.push(format!(
            "{}{} α={rate:.3} in [{lo}, {hi}] at {} dofs",
            if good { "" } else { "!" },
            r.name,
            last.cumulative_dofs
        ));
    }
    (ok, parts.join("; "))
}

fn degree_of(name: &str) -> usize {
    name.split('-')
        .find_map(|s| s.strip_prefix('p').and_then(|d| d.parse().ok()))
        .expect("file names encode the degree")
}

#[test]
fn linear_goal_rates() {
    let (_, runs) = fig2();
    assert_eq!(runs.len(), 12);
    let (ok, detail) = rate_lines(runs, |p| Some((-(p as f64) - FIG2_HALF_WIDTH, -(p as f64) + FIG2_HALF_WIDTH)));
    report("linear-goal rates for four strategies and p = 1, 2, 3", ok, &detail);
}

#[test]
fn quadratic_goal_rates() {
    let dir = tempfile::tempdir().unwrap();
    let runs = figure("fig3", dir.path(), 4);
    assert_eq!(runs.len(), 6);
    let (ok, detail) = rate_lines(&runs, |p| FIG3_WINDOWS.iter().find(|w| w.0 == p).map(|w| (w.1, w.2)));
    report("quadratic-goal rates for both combinations, p = 1 and 3", ok, &detail);
}

fn suite_line(name: &str, rep: &SuiteReport, checks: &[&str]) {
    let selected: Vec<_> = if checks.is_empty() {
        rep.checks.iter().collect()
    } else {
        checks.iter().map(|c| rep.check(c).unwrap_or_else(|| panic!("missing check {c}"))).collect()
    };
    let ok = selected.iter().all(|c| c.passed);
    let detail = selected
        .iter()
        .map(|c| format!("{}{}: {}", if c.passed { "" } else { "!" }, c.name, c.detail))
        .collect::<Vec<_>>()
        .join("; ");
    report(name, ok, &detail);
}

#[test]
fn goal_error_bound() {
    suite_line("goal error bound on the manufactured problem", &goal_suite(), &["goal error bound"]);
}

#[test]
fn reliability() {
    suite_line("reliability on the manufactured problem", &goal_suite(), &["reliability"]);
}

#[test]
fn estimator_axioms() {
    suite_line(
        "estimator axioms",
        &axioms_suite(SEED),
        &[
            "reduction on refined elements",
            "stability ms-linear",
            "stability lshape-quadratic",
            "local discrete efficiency",
        ],
    );
}

#[test]
fn marking_strategies() {
    suite_line("marking strategies", &marking_suite(MARKING_FIELDS, SEED), &[]);
}

#[test]
fn mesh_refinement() {
    suite_line(
        "mesh refinement",
        &mesh_suite(MESH_CALLS, SEED),
        &[
            "R1 marked elements refined",
            "R2 children cover parent",
            "R3 children at most half",
            "conforming",
            "area conservation",
        ],
    );
}

#[test]
fn figure_determinism() {
    let (first_dir, first) = fig2();
    let second_dir = tempfile::tempdir().unwrap();
    let second = figure("fig2", second_dir.path(), 1);
    let mut differing = Vec::new();
    for (a, b) in first.iter().zip(&second) {
        let x = fs::read(first_dir.path().join(a.path.file_name().unwrap())).unwrap();
        let y = fs::read(&b.path).unwrap();
        if x != y {
            differing.push(a.name.clone());
        }
    }
    report(
        "repeated fig2 bundles are byte-identical",
        differing.is_empty() && first.len() == second.len(),
        &format!("{} CSVs compared, differing: {:?}", first.len(), differing),
    );
}
