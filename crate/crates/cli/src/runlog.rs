//! JSONL run logs and per-round DIMACS dumps.
//!
//! A log holds one `start` record, one `round` record per query and one
//! `end` (or `error`) record. Timings are only written when asked for, so
//! that two runs with the same seed give byte-identical logs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use dtlearn_core::cnf::Formula;
use dtlearn_core::count::CountEstimate;
use dtlearn_core::dimacs::to_dimacs;
use dtlearn_core::learn::{LearnOutcome, LearnStatus, Observer, QueryRecord, Stagnation};
use dtlearn_core::tree::TreeSpec;
use serde::Serialize;

/// Run parameters echoed into the `start` record.
#[derive(Clone, Debug, Serialize)]
pub struct RunParams {
    pub n_features: usize,
    pub depth: usize,
    pub oracle: String,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub exact_cap: u64,
    pub max_rounds: usize,
    pub stagnation: Stagnation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub cells: u64,
    pub exponent: u32,
    pub exact: bool,
}

impl From<&CountEstimate> for Estimate {
    fn from(c: &CountEstimate) -> Self {
        Estimate {
            cells: c.cells,
            exponent: c.exponent,
            exact: c.exact,
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Record<'a> {
    Start {
        #[serde(flatten)]
        params: &'a RunParams,
        hypothesis_space: String,
        initial: Estimate,
        vars: u32,
        clauses: usize,
    },
    Round {
        round: usize,
        query: String,
        answer: u8,
        score: Estimate,
        before: Estimate,
        after: Estimate,
        exact_count: Option<u64>,
        stagnant: bool,
        collapse: Option<bool>,
        vars: u32,
        clauses: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        select_ms: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        count_ms: Option<f64>,
    },
    End {
        status: LearnStatus,
        rounds: usize,
        stagnated: bool,
        nodes: Option<&'a [usize]>,
        leaves: Option<Vec<u8>>,
        truth_table: Option<String>,
    },
    Error {
        message: String,
    },
}

/// JSONL writer for one learner run.
pub struct RunLog<W: Write> {
    out: W,
    params: RunParams,
    timings: bool,
}

impl RunLog<BufWriter<File>> {
    pub fn create(path: &Path, params: RunParams, timings: bool) -> io::Result<Self> {
        Ok(RunLog::new(BufWriter::new(File::create(path)?), params, timings))
    }
}

impl<W: Write> RunLog<W> {
    pub fn new(out: W, params: RunParams, timings: bool) -> Self {
        RunLog { out, params, timings }
    }

    fn write(&mut self, record: &Record<'_>) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn finish(&mut self, outcome: &LearnOutcome) -> io::Result<()> {
        let tree = outcome.tree.as_ref();
        self.write(&Record::End {
            status: outcome.status,
            rounds: outcome.queries(),
            stagnated: outcome.stagnated(),
            nodes: tree.map(|t| t.node_feature()),
            leaves: tree.map(|t| t.leaf_label().iter().map(|&b| u8::from(b)).collect()),
            truth_table: tree.map(|t| t.truth_table().to_bitstring()),
        })
    }

    pub fn fail(&mut self, message: &str) -> io::Result<()> {
        self.write(&Record::Error {
            message: message.to_string(),
        })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Observer for RunLog<W> {
    fn on_start(&mut self, formula: &Formula, initial: &CountEstimate) -> io::Result<()> {
        let params = self.params.clone();
        let spec = TreeSpec::new(params.n_features, params.depth).map_err(io::Error::other)?;
        self.write(&Record::Start {
            params: &params,
            hypothesis_space: spec.hypothesis_space_size().to_string(),
            initial: initial.into(),
            vars: formula.num_vars(),
            clauses: formula.num_clauses(),
        })
    }

    fn on_round(&mut self, r: &QueryRecord, _formula: &Formula) -> io::Result<()> {
        let ms = |d: std::time::Duration| self.timings.then_some(d.as_secs_f64() * 1e3);
        let record = Record::Round {
            round: r.round,
            query: r.x_star.to_bitstring(),
            answer: u8::from(r.y_star),
            score: (&r.score).into(),
            before: (&r.est_before).into(),
            after: (&r.est_after).into(),
            exact_count: r.est_after.exact.then_some(r.est_after.cells),
            stagnant: r.stagnant,
            collapse: r.collapse,
            vars: r.vars,
            clauses: r.clauses,
            select_ms: ms(r.select_time),
            count_ms: ms(r.count_time),
        };
        self.write(&record)
    }
}

/// Writes the version space as `round_<k>.cnf` after every round,
/// starting with the base encoding as `round_0.cnf`.
pub struct DimacsDump {
    dir: PathBuf,
}

impl DimacsDump {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(DimacsDump { dir })
    }

    fn dump(&self, round: usize, formula: &Formula) -> io::Result<()> {
        let text = to_dimacs(formula).map_err(io::Error::other)?;
        std::fs::write(self.dir.join(format!("round_{round}.cnf")), text)
    }
}

impl Observer for DimacsDump {
    fn on_start(&mut self, formula: &Formula, _initial: &CountEstimate) -> io::Result<()> {
        self.dump(0, formula)
    }

    fn on_round(&mut self, record: &QueryRecord, formula: &Formula) -> io::Result<()> {
        self.dump(record.round, formula)
    }
}

/// Forwards every event to each observer in turn.
#[derive(Default)]
pub struct Fanout<'a> {
    pub observers: Vec<&'a mut dyn Observer>,
}

impl Observer for Fanout<'_> {
    fn on_start(&mut self, formula: &Formula, initial: &CountEstimate) -> io::Result<()> {
        for o in &mut self.observers {
            o.on_start(formula, initial)?;
        }
        Ok(())
    }

    fn on_round(&mut self, record: &QueryRecord, formula: &Formula) -> io::Result<()> {
        for o in &mut self.observers {
            o.on_round(record, formula)?;
        }
        Ok(())
    }
}
