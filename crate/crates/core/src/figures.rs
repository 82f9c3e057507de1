//! Run sets that reproduce the data behind the convergence figures.

use crate::driver::RunConfig;
use crate::estimators::EstimatorCombination;

pub const FIGURES: [&str; 2] = ["fig2", "fig3"];

/// The four marking variants compared on the linear-goal square.
pub const FIG2_STRATEGIES: [&str; 4] = ["maximum-union", "equidist-union", "strategyB:max-sin-exp", "strategyB:pnorm10"];

pub const FIG3_COMBINATIONS: [EstimatorCombination; 2] = [EstimatorCombination::Symmetric, EstimatorCombination::ProductForm];

/// One named run of a figure bundle.
#[derive(Clone, Debug)]
pub struct NamedRun {
    pub name: String,
    pub config: RunConfig,
}

impl NamedRun {
    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

fn file_safe(key: &str) -> String {
    key.replace(':', "-")
}

/// Runs of a figure bundle, or `None` for an unknown name.
pub fn figure_runs(which: &str, theta: f64, max_cumulative_dofs: usize) -> Option<Vec<NamedRun>> {
    let mut runs = Vec::new();
    match which {
        "fig2" => {
            for p in 1..=3 {
                for s in FIG2_STRATEGIES {
                    runs.push(NamedRun {
                        name: format!("ms-p{p}-{}", file_safe(s)),
                        config: RunConfig {
                            problem: "ms-linear".into(),
                            degree: p,
                            theta,
                            strategy: s.into(),
                            max_cumulative_dofs,
                            ..Default::default()
                        },
                    });
                }
            }
        }
        "fig3" => {
            for p in 1..=3 {
                for c in FIG3_COMBINATIONS {
                    runs.push(NamedRun {
                        name: format!("lshape-p{p}-strategyB-mean-{}", c.key()),
                        config: RunConfig {
                            problem: "lshape-quadratic".into(),
                            degree: p,
                            theta,
                            strategy: "strategyB:mean".into(),
                            combination: Some(c),
                            max_cumulative_dofs,
                            ..Default::default()
                        },
                    });
                }
            }
        }
        _ => return None,
    }
    Some(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_sizes_and_unique_names() {
        for (fig, n) in [("fig2", 12), ("fig3", 6)] {
            let runs = figure_runs(fig, 0.5, 1000).unwrap();
            assert_eq!(runs.len(), n);
            let mut names: Vec<_> = runs.iter().map(|r| r.file_name()).collect();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), n);
            assert!(runs.iter().all(|r| r.config.validate().is_ok()));
        }
        assert!(figure_runs("fig4", 0.5, 1000).is_none());
    }

    #[test]
    fn names_encode_degree_and_strategy() {
        let runs = figure_runs("fig2", 0.5, 1000).unwrap();
        assert_eq!(runs[0].file_name(), "ms-p1-maximum-union.csv");
        assert_eq!(runs[11].file_name(), "ms-p3-strategyB-pnorm10.csv");
    }
}
