//! Line-oriented experiment files.
//!
//! ```text
//! # keys before the first section apply to every run
//! problem = manufactured
//! theta = 0.5
//!
//! [coarse]
//! p = 1
//! strategy = doerfler-smaller
//! maxCumulativeDofs = 20000
//! ```
//!
//! A file without sections describes a single run named after the file.

use std::collections::BTreeSet;
use std::str::FromStr;

use goafem::driver::RunConfig;
use goafem::marking::Strategy;
use goafem::problems::PROBLEM_NAMES;
use goafem::EstimatorCombination;

use crate::CliError;

pub const KEYS: [&str; 10] = [
    "problem",
    "p",
    "degree",
    "theta",
    "strategy",
    "combination",
    "maxCumulativeDofs",
    "maxLevels",
    "estimatorFloor",
    "solverTolerance",
];

#[derive(Clone, Debug)]
pub struct NamedConfig {
    pub name: String,
    pub config: RunConfig,
}

/// Closest candidate by Jaro-Winkler similarity, if it is close enough to be useful.
pub fn suggest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::jaro_winkler(word, c), c))
        .filter(|(s, _)| *s > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

fn unknown(kind: &str, line: usize, value: &str, valid: &[&str]) -> CliError {
    let hint = suggest(value, valid.iter().copied())
        .map(|s| format!(" (did you mean `{s}`?)"))
        .unwrap_or_default();
    CliError::Config(format!(
        "line {line}: unknown {kind} `{value}`{hint}; valid: {}",
        valid.join(", ")
    ))
}

fn number<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("line {line}: `{key}` expects a number, got `{value}`")))
}

fn apply(config: &mut RunConfig, line: usize, key: &str, value: &str) -> Result<(), CliError> {
    match key {
        "problem" => {
            if !PROBLEM_NAMES.contains(&value) {
                return Err(unknown("problem", line, value, &PROBLEM_NAMES));
            }
            config.problem = value.to_string();
        }
        "p" | "degree" => config.degree = number(line, key, value)?,
        "theta" => config.theta = number(line, key, value)?,
        "strategy" => {
            if Strategy::from_key(value).is_err() {
                return Err(unknown("strategy", line, value, &Strategy::KEYS));
            }
            config.strategy = value.to_string();
        }
        "combination" => {
            config.combination = Some(
                EstimatorCombination::from_str(value)
                    .map_err(|_| unknown("combination", line, value, &EstimatorCombination::KEYS))?,
            )
        }
        "maxCumulativeDofs" => config.max_cumulative_dofs = number(line, key, value)?,
        "maxLevels" => config.max_levels = Some(number(line, key, value)?),
        "estimatorFloor" => config.estimator_floor = number(line, key, value)?,
        "solverTolerance" => config.solver.rel_tol = number(line, key, value)?,
        _ => return Err(unknown("key", line, key, &KEYS)),
    }
    Ok(())
}

/// Parses an experiment file; `default_name` names a run without sections.
pub fn parse(text: &str, default_name: &str) -> Result<Vec<NamedConfig>, CliError> {
    let mut shared = RunConfig::default();
    let mut runs: Vec<(NamedConfig, usize)> = Vec::new();
    let mut names = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .and_then(|r| r.strip_prefix("run").map(str::trim).or(Some(r)))
                .filter(|n| !n.is_empty())
                .ok_or_else(|| CliError::Config(format!("line {line}: malformed section header `{content}`")))?;
            if name.contains(['/', '\\']) {
                return Err(CliError::Config(format!("line {line}: run name `{name}` must not contain path separators")));
            }
            if !names.insert(name.to_string()) {
                return Err(CliError::Config(format!("line {line}: duplicate run name `{name}`")));
            }
            runs.push((
                NamedConfig {
                    name: name.to_string(),
                    config: shared.clone(),
                },
                line,
            ));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| CliError::Config(format!("line {line}: expected `key = value`, got `{content}`")))?;
        match runs.last_mut() {
            Some((run, _)) => apply(&mut run.config, line, key, value)?,
            None => apply(&mut shared, line, key, value)?,
        }
    }
    if runs.is_empty() {
        runs.push((
            NamedConfig {
                name: default_name.to_string(),
                config: shared,
            },
            1,
        ));
    }
    for (run, line) in &runs {
        run.config
            .validate()
            .map_err(|e| CliError::Config(format!("run `{}` (line {line}): {e}", run.name)))?;
    }
    Ok(runs.into_iter().map(|(r, _)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_run_without_sections() {
        let runs = parse("problem = manufactured\np = 2\ntheta = 0.3 # bulk\nmaxCumulativeDofs = 20000\n", "cfg").unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].name, "cfg");
        assert_eq!(runs[0].config.degree, 2);
        assert_eq!(runs[0].config.theta, 0.3);
        assert_eq!(runs[0].config.max_cumulative_dofs, 20000);
    }

    #[test]
    fn sections_inherit_shared_keys() {
        let text = "theta = 0.4\n[run a]\nproblem = ms-linear\n[b]\nproblem = lshape-quadratic\ncombination = symmetric\n";
        let runs = parse(text, "x").unwrap();
        assert_eq!(runs.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(runs.iter().all(|r| r.config.theta == 0.4));
        assert_eq!(runs[1].config.combination, Some(EstimatorCombination::Symmetric));
    }

    #[test]
    fn errors_carry_line_numbers_and_suggestions() {
        let err = parse("\nstrategy = doerfler-smallr\n", "x").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("did you mean `doerfler-smaller`"), "{err}");
        assert!(err.contains("rho-doerfler"), "{err}");
        let err = parse("thetta = 0.5\n", "x").unwrap_err().to_string();
        assert!(err.contains("did you mean `theta`"), "{err}");
        assert!(parse("p = two\n", "x").unwrap_err().to_string().contains("expects a number"));
        assert!(parse("[a]\n[a]\n", "x").unwrap_err().to_string().contains("duplicate"));
        assert!(parse("just text\n", "x").is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(parse("theta = 1.5\n", "x"), Err(CliError::Config(_))));
        assert!(matches!(parse("p = 4\n", "x"), Err(CliError::Config(_))));
    }
}
