//! Command-line front end for the decision-tree learner: oracle adapters,
//! run logs and the experiment grid.

pub mod experiment;
pub mod oracle;
pub mod runlog;

use std::path::PathBuf;

use anyhow::Context;
use dtlearn_core::learn::{run_observed, LearnOutcome, LearnerConfig};
use dtlearn_core::tree::TreeSpec;

use oracle::OracleSpec;
use runlog::{DimacsDump, Fanout, RunLog, RunParams};

/// Everything one learner run needs.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub spec: TreeSpec,
    pub oracle: OracleSpec,
    pub config: LearnerConfig,
    pub log: Option<PathBuf>,
    pub emit_dimacs: Option<PathBuf>,
    pub timings: bool,
}

impl RunOptions {
    pub fn params(&self) -> RunParams {
        RunParams {
            n_features: self.spec.n_features,
            depth: self.spec.depth,
            oracle: self.oracle.to_string(),
            seed: self.config.seed,
            epsilon: self.config.counter.approx.epsilon,
            delta: self.config.counter.approx.delta,
            exact_cap: self.config.counter.exact_cap,
            max_rounds: self.config.max_rounds.unwrap_or(self.spec.num_inputs()),
            stagnation: self.config.stagnation,
        }
    }
}

/// Runs the learner against the configured oracle, writing the log and
/// DIMACS dumps as it goes. Failures are recorded in the log before they
/// are returned.
pub fn execute(opts: &RunOptions) -> anyhow::Result<LearnOutcome> {
    let mut log = match &opts.log {
        Some(path) => Some(
            RunLog::create(path, opts.params(), opts.timings)
                .with_context(|| format!("creating log {}", path.display()))?,
        ),
        None => None,
    };
    let mut dump = match &opts.emit_dimacs {
        Some(dir) => Some(DimacsDump::new(dir).with_context(|| format!("creating {}", dir.display()))?),
        None => None,
    };
    let result = (|| {
        let oracle = opts.oracle.open(opts.spec)?;
        let mut fan = Fanout::default();
        if let Some(l) = log.as_mut() {
            fan.observers.push(l);
        }
        if let Some(d) = dump.as_mut() {
            fan.observers.push(d);
        }
        Ok::<_, anyhow::Error>(run_observed(opts.spec, oracle, &opts.config, &mut fan)?)
    })();
    if let Some(l) = log.as_mut() {
        match &result {
            Ok(outcome) => l.finish(outcome)?,
            Err(e) => l.fail(&format!("{e:#}"))?,
        }
    }
    result
}
