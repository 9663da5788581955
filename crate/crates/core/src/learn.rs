//! The query loop: pick the input whose answer splits the version space most
//! evenly, ask the oracle, record the answer as constraints, recount.
//!
//! The loop ends when at most one tree survives, when a round fails to
//! shrink the count (or no candidate could) and the miter shows every
//! survivor computes the same function, or when the round limit is hit.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::cnf::Formula;
use crate::count::{count, count_under_hypothesis, derive_seed, CountError, CountEstimate, CounterConfig};
use crate::encode::{add_observation, build_miter, decode_model, encode_base, EncodeError, VarLayout};
use crate::sat::{solve, SatError, SolveResult, SolverConfig};
use crate::tree::{DecisionTree, Input, TreeSpec, TruthTable};

/// Answers membership queries.
pub trait Oracle {
    fn answer(&mut self, x: &Input) -> Result<bool, OracleError>;
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle protocol violation: {0}")]
    Protocol(String),
    #[error("oracle i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Oracle for DecisionTree {
    fn answer(&mut self, x: &Input) -> Result<bool, OracleError> {
        Ok(self.evaluate(x))
    }
}

impl Oracle for TruthTable {
    fn answer(&mut self, x: &Input) -> Result<bool, OracleError> {
        Ok(self.get(x))
    }
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn answer(&mut self, x: &Input) -> Result<bool, OracleError> {
        (**self).answer(x)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn answer(&mut self, x: &Input) -> Result<bool, OracleError> {
        (**self).answer(x)
    }
}

/// When a round counts as stagnant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stagnation {
    /// The count moved by less than one.
    #[default]
    Flat,
    /// The count did not go down.
    NoProgress,
}

impl std::str::FromStr for Stagnation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(Stagnation::Flat),
            "no-progress" => Ok(Stagnation::NoProgress),
            other => Err(format!("unknown stagnation rule `{other}` (expected flat or no-progress)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig {
    pub counter: CounterConfig,
    /// Defaults to `2^n`.
    pub max_rounds: Option<usize>,
    pub seed: u64,
    pub stagnation: Stagnation,
    /// Largest `n` for which every unqueried input is scored.
    pub candidate_guard: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            counter: CounterConfig::default(),
            max_rounds: None,
            seed: 0,
            stagnation: Stagnation::Flat,
            candidate_guard: 16,
        }
    }
}

impl LearnerConfig {
    fn solver(&self) -> &SolverConfig {
        &self.counter.solver
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("{n} features exceed the candidate guard of {guard}")]
    TooManyFeatures { n: usize, guard: usize },
    #[error("max_rounds must be at least 1")]
    NoRounds,
    #[error("round {round}: no unqueried input left to score")]
    NoCandidates { round: usize },
    #[error("round {round}: counting failed: {source}")]
    Count { round: usize, source: CountError },
    #[error("round {round}: solver failed: {source}")]
    Sat { round: usize, source: SatError },
    #[error("round {round}: {source}")]
    Oracle { round: usize, source: OracleError },
    #[error("round {round}: oracle answers fit no tree in the hypothesis space")]
    OracleOutsideSpace { round: usize },
    #[error("round {round}: decoding failed: {source}")]
    Decode { round: usize, source: EncodeError },
    #[error("round {round}: decoded tree contradicts observation {x}")]
    InconsistentTree { round: usize, x: Input },
    #[error("observer: {0}")]
    Observer(std::io::Error),
}

/// Split counts of one candidate input.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScore {
    pub x: Input,
    pub c0: CountEstimate,
    pub c1: CountEstimate,
}

impl CandidateScore {
    pub fn score(&self) -> &CountEstimate {
        if self.c0.cmp_value(&self.c1).is_le() {
            &self.c0
        } else {
            &self.c1
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub x_star: Input,
    pub score: CountEstimate,
    /// Every scored candidate in input order.
    pub candidates: Vec<CandidateScore>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub round: usize,
    pub x_star: Input,
    pub y_star: bool,
    pub score: CountEstimate,
    pub est_before: CountEstimate,
    pub est_after: CountEstimate,
    pub stagnant: bool,
    /// Miter outcome when the round triggered a collapse check.
    pub collapse: Option<bool>,
    pub select_time: Duration,
    pub count_time: Duration,
    pub vars: u32,
    pub clauses: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum LearnStatus {
    UniqueTree,
    FunctionalCollapse,
    NoUniqueTree,
}

#[derive(Clone, Debug)]
pub struct LearnOutcome {
    pub status: LearnStatus,
    pub tree: Option<DecisionTree>,
    pub trace: Vec<QueryRecord>,
    pub initial: CountEstimate,
    /// The run stopped because no unqueried input could split the space,
    /// without spending a query on it.
    pub stalled: bool,
    pub formula: Formula,
    pub layout: VarLayout,
}

impl LearnOutcome {
    pub fn queries(&self) -> usize {
        self.trace.len()
    }

    pub fn stagnated(&self) -> bool {
        self.stalled || self.trace.iter().any(|r| r.stagnant)
    }
}

/// Hooks for logging and formula dumps.
pub trait Observer {
    fn on_start(&mut self, _formula: &Formula, _initial: &CountEstimate) -> std::io::Result<()> {
        Ok(())
    }

    fn on_round(&mut self, _record: &QueryRecord, _formula: &Formula) -> std::io::Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Scores every input not in `queried` and returns the one maximizing
/// `min(c0, c1)`; ties go to the smallest bitstring.
pub fn select_query(
    formula: &Formula,
    layout: &VarLayout,
    queried: &HashSet<Input>,
    config: &LearnerConfig,
    round: usize,
) -> Result<Selection, LearnError> {
    let spec = layout.spec();
    if spec.n_features > config.candidate_guard {
        return Err(LearnError::TooManyFeatures {
            n: spec.n_features,
            guard: config.candidate_guard,
        });
    }
    let candidates: Vec<Input> = spec.inputs().filter(|x| !queried.contains(x)).collect();
    let scored = candidates
        .par_iter()
        .map(|x| {
            let seed = |b: u64| derive_seed(&[config.seed, round as u64, x.index() as u64, b]);
            let c0 = count_under_hypothesis(formula, layout, x, false, &config.counter, seed(0))?;
            let c1 = count_under_hypothesis(formula, layout, x, true, &config.counter, seed(1))?;
            Ok(CandidateScore { x: x.clone(), c0, c1 })
        })
        .collect::<Result<Vec<_>, CountError>>()
        .map_err(|source| LearnError::Count { round, source })?;
    let mut best: Option<&CandidateScore> = None;
    for c in &scored {
        if best.is_none_or(|b| c.score().cmp_value(b.score()).is_gt()) {
            best = Some(c);
        }
    }
    let best = best.ok_or(LearnError::NoCandidates { round })?;
    Ok(Selection {
        x_star: best.x.clone(),
        score: best.score().clone(),
        candidates: scored.clone(),
    })
}

/// `true` iff all trees left in `formula` compute the same function.
pub fn check_functional_collapse(formula: &Formula, layout: &VarLayout, solver: &SolverConfig) -> Result<bool, SatError> {
    let miter = build_miter(formula, layout);
    Ok(!solve(&miter.formula, &[], solver)?.is_sat())
}

pub fn run(spec: TreeSpec, oracle: impl Oracle, config: &LearnerConfig) -> Result<LearnOutcome, LearnError> {
    run_observed(spec, oracle, config, &mut ())
}

pub fn run_observed(
    spec: TreeSpec,
    mut oracle: impl Oracle,
    config: &LearnerConfig,
    observer: &mut dyn Observer,
) -> Result<LearnOutcome, LearnError> {
    if spec.n_features > config.candidate_guard {
        return Err(LearnError::TooManyFeatures {
            n: spec.n_features,
            guard: config.candidate_guard,
        });
    }
    let max_rounds = config.max_rounds.unwrap_or(spec.num_inputs());
    if max_rounds == 0 {
        return Err(LearnError::NoRounds);
    }
    let (mut formula, mut layout) = encode_base(spec);
    let initial = count(&formula, &config.counter, derive_seed(&[config.seed, 0, u64::MAX]))
        .map_err(|source| LearnError::Count { round: 0, source })?;
    observer.on_start(&formula, &initial).map_err(LearnError::Observer)?;

    let mut queried = HashSet::new();
    let mut trace: Vec<QueryRecord> = Vec::new();
    let mut c_prev = initial.clone();
    let finish = |status, tree, trace, formula, layout| LearnOutcome {
        status,
        tree,
        trace,
        initial: initial.clone(),
        stalled: false,
        formula,
        layout,
    };

    for round in 1.. {
        if round > max_rounds || queried.len() == spec.num_inputs() {
            // the count can stay above one with every input answered, so
            // settle with the miter before giving up
            let round = round - 1;
            let collapsed = check_functional_collapse(&formula, &layout, config.solver())
                .map_err(|source| LearnError::Sat { round, source })?;
            if collapsed {
                let tree = retrieve_tree(&formula, &layout, config, round)?;
                return Ok(finish(LearnStatus::FunctionalCollapse, Some(tree), trace, formula, layout));
            }
            return Ok(finish(LearnStatus::NoUniqueTree, None, trace, formula, layout));
        }

        let t = Instant::now();
        let sel = select_query(&formula, &layout, &queried, config, round)?;
        let select_time = t.elapsed();
        if sel.score.cells == 0 {
            // every answer is already forced, so asking cannot shrink the
            // count; settle with the miter instead
            let collapsed = check_functional_collapse(&formula, &layout, config.solver())
                .map_err(|source| LearnError::Sat { round, source })?;
            if collapsed {
                let tree = retrieve_tree(&formula, &layout, config, round)?;
                let mut out = finish(LearnStatus::FunctionalCollapse, Some(tree), trace, formula, layout);
                out.stalled = true;
                return Ok(out);
            }
        }
        let y = oracle
            .answer(&sel.x_star)
            .map_err(|source| LearnError::Oracle { round, source })?;
        add_observation(&mut formula, &mut layout, &sel.x_star, y)
            .map_err(|source| LearnError::Decode { round, source })?;
        queried.insert(sel.x_star.clone());

        let t = Instant::now();
        let c_new = count(&formula, &config.counter, derive_seed(&[config.seed, round as u64, u64::MAX]))
            .map_err(|source| LearnError::Count { round, source })?;
        let count_time = t.elapsed();

        let mut record = QueryRecord {
            round,
            x_star: sel.x_star,
            y_star: y,
            score: sel.score,
            est_before: c_prev.clone(),
            est_after: c_new.clone(),
            stagnant: false,
            collapse: None,
            select_time,
            count_time,
            vars: formula.num_vars(),
            clauses: formula.num_clauses(),
        };

        if c_new.cells == 0 {
            let sat = solve(&formula, &[], config.solver()).map_err(|source| LearnError::Sat { round, source })?;
            if !sat.is_sat() {
                observer.on_round(&record, &formula).map_err(LearnError::Observer)?;
                return Err(LearnError::OracleOutsideSpace { round });
            }
        } else if c_new.to_u128() == Some(1) {
            observer.on_round(&record, &formula).map_err(LearnError::Observer)?;
            trace.push(record);
            let tree = retrieve_tree(&formula, &layout, config, round)?;
            return Ok(finish(LearnStatus::UniqueTree, Some(tree), trace, formula, layout));
        }

        record.stagnant = match config.stagnation {
            Stagnation::Flat => (c_new.as_f64() - c_prev.as_f64()).abs() < 1.0,
            Stagnation::NoProgress => c_new.cmp_value(&c_prev).is_ge(),
        };
        if record.stagnant {
            let collapsed = check_functional_collapse(&formula, &layout, config.solver())
                .map_err(|source| LearnError::Sat { round, source })?;
            record.collapse = Some(collapsed);
            observer.on_round(&record, &formula).map_err(LearnError::Observer)?;
            trace.push(record);
            if collapsed {
                let tree = retrieve_tree(&formula, &layout, config, round)?;
                return Ok(finish(LearnStatus::FunctionalCollapse, Some(tree), trace, formula, layout));
            }
        } else {
            observer.on_round(&record, &formula).map_err(LearnError::Observer)?;
            trace.push(record);
        }
        c_prev = c_new;
    }
    unreachable!("the round loop only exits by returning")
}

/// One SAT call on the version space, decoded and checked against every
/// observation.
fn retrieve_tree(formula: &Formula, layout: &VarLayout, config: &LearnerConfig, round: usize) -> Result<DecisionTree, LearnError> {
    let model = match solve(formula, &[], config.solver()).map_err(|source| LearnError::Sat { round, source })? {
        SolveResult::Sat(m) => m,
        SolveResult::Unsat => return Err(LearnError::OracleOutsideSpace { round }),
    };
    let tree = decode_model(&model, layout).map_err(|source| LearnError::Decode { round, source })?;
    for (x, y) in layout.observations() {
        if tree.evaluate(x) != *y {
            return Err(LearnError::InconsistentTree { round, x: x.clone() });
        }
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec32() -> TreeSpec {
        TreeSpec::new(3, 2).unwrap()
    }

    #[test]
    fn first_query_is_all_zeros() {
        let (f, layout) = encode_base(spec32());
        let sel = select_query(&f, &layout, &HashSet::new(), &LearnerConfig::default(), 1).unwrap();
        assert_eq!(sel.x_star.to_bitstring(), "000");
        assert_eq!(sel.score.to_u128(), Some(216));
        assert!(sel.candidates.iter().all(|c| c.score().to_u128() == Some(216)));
    }

    #[test]
    fn last_candidate_is_taken() {
        let spec = spec32();
        let (f, layout) = encode_base(spec);
        let queried: HashSet<Input> = spec.inputs().filter(|x| x.index() != 5).collect();
        let sel = select_query(&f, &layout, &queried, &LearnerConfig::default(), 1).unwrap();
        assert_eq!(sel.x_star.index(), 5);
    }

    #[test]
    fn base_space_has_not_collapsed() {
        let (f, layout) = encode_base(spec32());
        assert!(!check_functional_collapse(&f, &layout, &SolverConfig::default()).unwrap());
    }

    #[test]
    fn motivating_trace() {
        let spec = spec32();
        let hidden = DecisionTree::new(spec, vec![3, 1, 2], vec![true, false, true, false]).unwrap();
        let out = run(spec, hidden.clone(), &LearnerConfig::default()).unwrap();
        let xs: Vec<String> = out.trace.iter().map(|r| r.x_star.to_bitstring()).collect();
        assert_eq!(xs, ["000", "111", "001", "011", "100", "101", "010"]);
        let counts: Vec<u128> = out.trace.iter().map(|r| r.est_after.to_u128().unwrap()).collect();
        assert_eq!(counts, [216, 108, 72, 35, 17, 9, 1]);
        assert_eq!(out.status, LearnStatus::UniqueTree);
        assert_eq!(out.tree.unwrap(), hidden);
    }

    #[test]
    fn constant_function_collapses_early() {
        let spec = spec32();
        let hidden = DecisionTree::constant(spec, true);
        let out = run(spec, hidden.clone(), &LearnerConfig::default()).unwrap();
        assert_eq!(out.status, LearnStatus::FunctionalCollapse);
        assert!(out.queries() < 8);
        assert!(out.tree.unwrap().functionally_equal(&hidden));
    }

    #[test]
    fn forced_answers_are_not_asked() {
        // with seed 16 the last unqueried input is already decided after 7
        // answers, which used to cost an 8th query that changed nothing
        let spec = spec32();
        let hidden = DecisionTree::random(spec, 16);
        let out = run(spec, hidden.clone(), &LearnerConfig::default()).unwrap();
        assert_eq!(out.status, LearnStatus::FunctionalCollapse);
        assert!(out.stalled);
        assert!(out.stagnated());
        assert!(out.queries() < 8);
        assert!(out.tree.unwrap().functionally_equal(&hidden));
    }

    #[test]
    fn oracle_outside_space_is_never_asked_a_forced_input() {
        // x1 or not x2 needs depth 2; after 00 -> 1 and 11 -> 1 only the two
        // constant-one stumps survive, so 01 is never asked and the run ends
        // with a tree that fits every answer it did get
        struct Implied;
        impl Oracle for Implied {
            fn answer(&mut self, x: &Input) -> Result<bool, OracleError> {
                Ok(x.feature(1) || !x.feature(2))
            }
        }
        let out = run(TreeSpec::new(2, 1).unwrap(), Implied, &LearnerConfig::default()).unwrap();
        assert_eq!(out.status, LearnStatus::FunctionalCollapse);
        assert!(out.stalled);
        assert_eq!(out.queries(), 2);
        let tree = out.tree.unwrap();
        assert!(tree.spec().inputs().all(|x| tree.evaluate(&x)));
    }

    #[test]
    fn guard_is_enforced() {
        let cfg = LearnerConfig {
            candidate_guard: 2,
            ..LearnerConfig::default()
        };
        let spec = spec32();
        assert!(matches!(
            run(spec, DecisionTree::constant(spec, false), &cfg),
            Err(LearnError::TooManyFeatures { n: 3, guard: 2 })
        ));
    }
}
