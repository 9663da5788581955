//! Satisfiability over [`Formula`]: one-shot solving with assumptions and
//! projected model enumeration with blocking clauses.

mod external;
mod solver;

use thiserror::Error;

use crate::cnf::{Formula, Lit, Var, DEFAULT_XOR_CHUNK};

pub use external::{solve_external, ExternalSolver};
pub use solver::{Branching, BudgetExhausted, Solver, SolverStats};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    /// Conflicts allowed per `solve` call; `None` is unlimited.
    pub conflict_budget: Option<u64>,
    /// Randomizes the initial order and phases when set.
    pub seed: Option<u64>,
    pub branching: Branching,
    /// Chunk size used when native parity constraints are lowered.
    pub xor_chunk: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            conflict_budget: None,
            seed: None,
            branching: Branching::default(),
            xor_chunk: DEFAULT_XOR_CHUNK,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SatError {
    #[error("conflict budget exhausted after {0} conflicts")]
    BudgetExhausted(u64),
    #[error("assumption {0} mentions an unallocated variable")]
    UnallocatedAssumption(Lit),
    #[error("projected enumeration needs a nonempty projection set")]
    EmptyProjection,
    #[error("external solver: {0}")]
    External(String),
}

impl From<BudgetExhausted> for SatError {
    fn from(e: BudgetExhausted) -> Self {
        SatError::BudgetExhausted(e.conflicts)
    }
}

/// A total assignment over a formula's allocated variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn new(values: Vec<bool>) -> Model {
        Model { values }
    }

    pub fn value(&self, v: Var) -> bool {
        self.values[v.index() as usize - 1]
    }

    pub fn lit_value(&self, l: Lit) -> bool {
        l.eval(self.value(l.var()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// The model restricted to `vars`, as true literals.
    pub fn project(&self, vars: impl IntoIterator<Item = Var>) -> Vec<Lit> {
        vars.into_iter().map(|v| v.lit(self.value(v))).collect()
    }
}

/// Read access to (possibly partial) assignments.
pub trait Valuation {
    fn get(&self, v: Var) -> Option<bool>;
}

impl Valuation for Model {
    fn get(&self, v: Var) -> Option<bool> {
        self.values.get(v.index() as usize - 1).copied()
    }
}

/// Literals sorted by variable, as produced by projected enumeration.
impl Valuation for [Lit] {
    fn get(&self, v: Var) -> Option<bool> {
        self.binary_search_by_key(&v, |l| l.var())
            .ok()
            .map(|i| self[i].is_positive())
    }
}

impl Valuation for Vec<Lit> {
    fn get(&self, v: Var) -> Option<bool> {
        Valuation::get(self.as_slice(), v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            SolveResult::Sat(m) => Some(m),
            SolveResult::Unsat => None,
        }
    }
}

/// Decides `formula` under `assumptions` with the built-in engine.
pub fn solve(formula: &Formula, assumptions: &[Lit], config: &SolverConfig) -> Result<SolveResult, SatError> {
    for &a in assumptions {
        if !formula.is_allocated(a.var()) {
            return Err(SatError::UnallocatedAssumption(a));
        }
    }
    let mut s = Solver::from_formula(formula, config.clone());
    if s.solve(assumptions)? {
        let n = formula.num_vars() as usize;
        Ok(SolveResult::Sat(Model::new(s.model()[..n].to_vec())))
    } else {
        Ok(SolveResult::Unsat)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    /// Distinct projected assignments, each sorted by variable.
    pub models: Vec<Vec<Lit>>,
    /// No projected model beyond `models` exists.
    pub exhausted: bool,
}

/// Lists up to `limit` distinct projected models. Works on the solver's own
/// copy of the clauses, so `formula` is untouched.
pub fn enumerate_projected(formula: &Formula, limit: usize, config: &SolverConfig) -> Result<Enumeration, SatError> {
    if formula.projection().is_empty() {
        return Err(SatError::EmptyProjection);
    }
    let proj: Vec<Var> = formula.projection().iter().copied().collect();
    let mut s = Solver::from_formula(formula, config.clone());
    let mut models = Vec::new();
    let exhausted = bounded_enumerate(&mut s, &[], &proj, limit, |m| models.push(m))? < limit;
    Ok(Enumeration { models, exhausted })
}

/// Core blocking-clause loop shared with the counters. Finds up to `limit`
/// projected models under `assumptions`, handing each to `sink`. The
/// blocking clauses hang off a fresh activation literal that is switched off
/// permanently before returning, so the solver can be reused. Returns how many
/// models were found; fewer than `limit` means the cell is exhausted.
pub fn bounded_enumerate(
    s: &mut Solver,
    assumptions: &[Lit],
    proj: &[Var],
    limit: usize,
    mut sink: impl FnMut(Vec<Lit>),
) -> Result<usize, SatError> {
    if limit == 0 {
        return Ok(0);
    }
    let act = s.new_var().positive();
    let mut assume = assumptions.to_vec();
    assume.push(act);
    let mut found = 0;
    let mut block = Vec::with_capacity(proj.len() + 1);
    let outcome = loop {
        if found >= limit {
            break Ok(());
        }
        match s.solve(&assume) {
            Err(e) => break Err(SatError::from(e)),
            Ok(false) => break Ok(()),
            Ok(true) => {
                let projected: Vec<Lit> = proj.iter().map(|&v| v.lit(s.model_value(v))).collect();
                block.clear();
                block.push(!act);
                block.extend(projected.iter().map(|&l| !l));
                sink(projected);
                found += 1;
                s.add_clause(&block);
            }
        }
    };
    s.add_clause(&[!act]);
    outcome.map(|()| found)
}
