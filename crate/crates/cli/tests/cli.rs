use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use goafem::driver::CSV_HEADER;

fn goafem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goafem"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const MINIMAL: &str = "problem = manufactured\np = 1\ntheta = 0.5\nstrategy = doerfler-smaller\nmaxCumulativeDofs = 20000\n";

#[test]
fn missing_config_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = goafem(&["run", "absent.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.cfg"));
}

#[test]
fn minimal_config_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("minimal.cfg"), MINIMAL).unwrap();
    let o = goafem(&["run", "minimal.cfg", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/minimal.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert!(lines.count() >= 5);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("minimal") && table.contains("alpha"));
}

#[test]
fn unknown_strategy_lists_valid_keys() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "problem = ms-linear\nstrategy = doerfler\n").unwrap();
    let o = goafem(&["run", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("line 2"), "{err}");
    for key in ["doerfler-smaller", "maximum-union", "strategyB:pnorm10"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn unknown_problem_and_suite_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.cfg"), "problem = lshape\n").unwrap();
    let o = goafem(&["run", "p.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("lshape-quadratic"));
    assert_eq!(goafem(&["verify", "meshes"], dir.path()).status.code(), Some(3));
    assert_eq!(goafem(&["figures", "fig4"], dir.path()).status.code(), Some(3));
    assert_eq!(goafem(&["run", "p.cfg", "--theta", "2"], dir.path()).status.code(), Some(3));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "maxCumulativeDofs = 20000\n[a]\nproblem = manufactured\n[b]\nproblem = lshape-quadratic\np = 2\nstrategy = strategyB:mean\n";
    fs::write(dir.path().join("two.cfg"), cfg).unwrap();
    for (out, jobs) in [("x", "1"), ("y", "4")] {
        let o = goafem(&["run", "two.cfg", "--out", out, "--jobs", jobs], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in ["a.csv", "b.csv"] {
        let x = fs::read(dir.path().join("x").join(name)).unwrap();
        let y = fs::read(dir.path().join("y").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn theta_override_changes_marking() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.cfg"), "problem = manufactured\nmaxLevels = 3\n").unwrap();
    goafem(&["run", "m.cfg", "--out", "a"], dir.path());
    goafem(&["run", "m.cfg", "--out", "b", "--theta", "0.9"], dir.path());
    let a = fs::read_to_string(dir.path().join("a/m.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("b/m.csv")).unwrap();
    let marked = |s: &str| s.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse::<usize>().unwrap();
    assert!(marked(&b) > marked(&a));
}

#[test]
fn figure_bundles_have_one_csv_per_run() {
    let dir = tempfile::tempdir().unwrap();
    for (fig, n) in [("fig2", 12), ("fig3", 6)] {
        let o = goafem(&["figures", fig, "--max-dofs", "2000", "--out", fig], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let csvs = fs::read_dir(dir.path().join(fig))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
            .count();
        assert_eq!(csvs, n);
    }
    assert!(dir.path().join("fig2/ms-p2-strategyB-max-sin-exp.csv").exists());
    assert!(dir.path().join("fig3/lshape-p3-strategyB-mean-product_form.csv").exists());
}

#[test]
fn verify_marking_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = goafem(&["verify", "marking"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
    assert!(out.contains("Dörfler minimality"));
}
