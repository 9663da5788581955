//! Grid runs: random hidden trees per `(n, d)` cell, one JSONL log per run
//! and a CSV summary.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::Context;
use dtlearn_core::learn::{LearnStatus, LearnerConfig};
use dtlearn_core::tree::{DecisionTree, TreeSpec};
use serde::Serialize;

use crate::oracle::OracleSpec;
use crate::{execute, RunOptions};

pub const DEFAULT_GRID: &[(usize, usize)] = &[(3, 2), (3, 3), (4, 2), (4, 3)];

/// A grid cell written as `<n>x<d>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell(pub TreeSpec);

impl FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = s.split_once('x').ok_or_else(|| format!("cell `{s}` is not of the form <n>x<d>"))?;
        let n = n.parse().map_err(|_| format!("bad feature count in `{s}`"))?;
        let d = d.parse().map_err(|_| format!("bad depth in `{s}`"))?;
        TreeSpec::new(n, d).map(Cell).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub grid: Vec<TreeSpec>,
    pub seeds: Vec<u64>,
    pub learner: LearnerConfig,
    pub out_dir: PathBuf,
    pub timings: bool,
}

/// One line of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub hypothesis_space: String,
    pub status: String,
    pub queries: usize,
    pub max_queries: usize,
    /// `1 - queries / 2^n`.
    pub savings: f64,
    pub stagnated: bool,
    pub collapse_confirmed: bool,
    pub correct: bool,
    pub error: String,
    pub total_ms: f64,
}

fn status_name(s: LearnStatus) -> &'static str {
    match s {
        LearnStatus::UniqueTree => "unique-tree",
        LearnStatus::FunctionalCollapse => "functional-collapse",
        LearnStatus::NoUniqueTree => "no-unique-tree",
    }
}

/// Runs every cell and seed. A failing run becomes an `error` row; the grid
/// carries on.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Vec<SummaryRow>> {
    let runs_dir = cfg.out_dir.join("runs");
    std::fs::create_dir_all(&runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;
    let summary_path = cfg.out_dir.join("summary.csv");
    let mut csv = csv::Writer::from_path(&summary_path).with_context(|| format!("creating {}", summary_path.display()))?;
    let mut rows = Vec::new();
    for &spec in &cfg.grid {
        for &seed in &cfg.seeds {
            let hidden = DecisionTree::random(spec, seed);
            let opts = RunOptions {
                spec,
                oracle: OracleSpec::Random(seed),
                config: LearnerConfig {
                    seed,
                    ..cfg.learner.clone()
                },
                log: Some(runs_dir.join(format!("n{}_d{}_s{seed}.jsonl", spec.n_features, spec.depth))),
                emit_dimacs: None,
                timings: cfg.timings,
            };
            let started = Instant::now();
            let result = execute(&opts);
            let total_ms = started.elapsed().as_secs_f64() * 1e3;
            let max_queries = spec.num_inputs();
            let mut row = SummaryRow {
                n: spec.n_features,
                d: spec.depth,
                seed,
                hypothesis_space: spec.hypothesis_space_size().to_string(),
                status: "error".into(),
                queries: 0,
                max_queries,
                savings: 0.0,
                stagnated: false,
                collapse_confirmed: false,
                correct: false,
                error: String::new(),
                total_ms,
            };
            match result {
                Ok(outcome) => {
                    row.status = status_name(outcome.status).into();
                    row.queries = outcome.queries();
                    row.savings = 1.0 - outcome.queries() as f64 / max_queries as f64;
                    row.stagnated = outcome.stagnated();
                    row.collapse_confirmed = outcome.status == LearnStatus::FunctionalCollapse;
                    row.correct = outcome.tree.as_ref().is_some_and(|t| t.functionally_equal(&hidden));
                }
                Err(e) => row.error = format!("{e:#}"),
            }
            csv.serialize(&row)?;
            csv.flush()?;
            rows.push(row);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cells() {
        assert_eq!("4x3".parse::<Cell>().unwrap().0, TreeSpec::new(4, 3).unwrap());
        assert!("4-3".parse::<Cell>().is_err());
        assert!("0x3".parse::<Cell>().is_err());
    }

    #[test]
    fn small_grid_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            grid: vec![TreeSpec::new(3, 2).unwrap()],
            seeds: vec![1, 2, 3],
            learner: LearnerConfig::default(),
            out_dir: dir.path().into(),
            timings: false,
        };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert!(r.correct, "{r:?}");
            assert_eq!(r.hypothesis_space, "432");
            assert!(r.queries <= 8);
            if r.stagnated {
                assert!(r.queries < 8);
            }
        }
        let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("n,d,seed,hypothesis_space,status,"));
        assert!(dir.path().join("runs/n3_d2_s2.jsonl").exists());
    }
}
