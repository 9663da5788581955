//! Propositional formulas: variables, literals, normalized clauses, parity
//! constraints and the projection (sampling) set.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Not;

use serde::{Deserialize, Serialize};

/// Default number of original variables folded into one parity block when a
/// XOR is lowered to CNF.
pub const DEFAULT_XOR_CHUNK: usize = 4;

/// A propositional variable. Indices are dense and start at 1.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var(u32);

impl Var {
    pub fn new(index: u32) -> Var {
        assert!(index > 0, "variable indices start at 1");
        Var(index)
    }

    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn positive(self) -> Lit {
        Lit::new(self, true)
    }

    #[inline]
    pub fn negative(self) -> Lit {
        Lit::new(self, false)
    }

    /// The literal of this variable that is true under `value`.
    #[inline]
    pub fn lit(self, value: bool) -> Lit {
        Lit::new(self, value)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A variable together with a polarity, packed as `index << 1 | negated`.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    #[inline]
    pub fn new(var: Var, positive: bool) -> Lit {
        Lit(var.0 << 1 | u32::from(!positive))
    }

    #[inline]
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    #[inline]
    pub fn is_negative(self) -> bool {
        self.0 & 1 == 1
    }

    /// Dense code usable as an array index (`2 * var + negated`).
    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// Truth value of this literal when its variable takes `value`.
    #[inline]
    pub fn eval(self, value: bool) -> bool {
        value == self.is_positive()
    }

    pub fn from_dimacs(value: i32) -> Lit {
        assert!(value != 0, "0 is the DIMACS clause terminator, not a literal");
        Lit::new(Var(value.unsigned_abs()), value > 0)
    }

    pub fn to_dimacs(self) -> i32 {
        let v = self.var().0 as i32;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }
}

impl Not for Lit {
    type Output = Lit;

    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of literals, kept sorted and duplicate free.
///
/// The empty clause is representable and marks the formula unsatisfiable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    lits: Vec<Lit>,
}

impl Clause {
    /// Normalizes `lits`. Returns `None` for a tautology.
    pub fn new(lits: impl IntoIterator<Item = Lit>) -> Option<Clause> {
        let mut lits: Vec<Lit> = lits.into_iter().collect();
        lits.sort_unstable();
        lits.dedup();
        // after sorting, x and !x are adjacent
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            return None;
        }
        Some(Clause { lits })
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn is_satisfied_by(&self, value: impl Fn(Var) -> bool) -> bool {
        self.lits.iter().any(|&l| l.eval(value(l.var())))
    }
}

/// `vars[0] ^ vars[1] ^ ... == parity`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct XorConstraint {
    vars: Vec<Var>,
    parity: bool,
}

impl XorConstraint {
    /// Repeated variables cancel in pairs.
    pub fn new(vars: impl IntoIterator<Item = Var>, parity: bool) -> XorConstraint {
        let mut sorted: Vec<Var> = vars.into_iter().collect();
        sorted.sort_unstable();
        let mut out: Vec<Var> = Vec::with_capacity(sorted.len());
        for v in sorted {
            if out.last() == Some(&v) {
                out.pop();
            } else {
                out.push(v);
            }
        }
        XorConstraint { vars: out, parity }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn parity(&self) -> bool {
        self.parity
    }

    pub fn is_satisfied_by(&self, value: impl Fn(Var) -> bool) -> bool {
        self.vars.iter().fold(false, |acc, &v| acc ^ value(v)) == self.parity
    }
}

/// Anything that can absorb clauses and hand out fresh variables. Lets the
/// parity lowering target both [`Formula`] and a live solver.
pub trait ClauseSink {
    fn fresh_var(&mut self) -> Var;
    fn push_clause(&mut self, lits: &[Lit]);
}

/// Lowers `xor` to CNF with a chain of parity blocks. Each block folds
/// `chunk_size` variables into one fresh auxiliary variable; the final block
/// (at most `chunk_size` variables) carries the parity. When `guard` is given,
/// only the final block is conditioned on it, so the auxiliaries stay
/// functionally defined and switching the guard off frees the constraint.
pub fn lower_xor<S: ClauseSink + ?Sized>(
    sink: &mut S,
    xor: &XorConstraint,
    chunk_size: usize,
    guard: Option<Lit>,
) {
    assert!(chunk_size >= 2, "parity chunks need at least two variables");
    let mut pending: Vec<Lit> = xor.vars.iter().map(|v| v.positive()).collect();
    if pending.is_empty() {
        if xor.parity {
            let marker: Vec<Lit> = guard.map(|g| !g).into_iter().collect();
            sink.push_clause(&marker);
        }
        return;
    }
    let mut start = 0;
    while pending.len() - start > chunk_size {
        let aux = sink.fresh_var().positive();
        let mut block: Vec<Lit> = pending[start..start + chunk_size].to_vec();
        block.push(aux);
        emit_parity(sink, &block, false, None);
        start += chunk_size;
        pending.push(aux);
    }
    emit_parity(sink, &pending[start..], xor.parity, guard);
}

/// Direct encoding: one clause per wrong-parity assignment of `lits`.
fn emit_parity<S: ClauseSink + ?Sized>(sink: &mut S, lits: &[Lit], parity: bool, guard: Option<Lit>) {
    let k = lits.len();
    let mut clause = Vec::with_capacity(k + 1);
    for mask in 0u32..(1 << k) {
        if (mask.count_ones() % 2 == 1) == parity {
            continue;
        }
        clause.clear();
        for (j, &l) in lits.iter().enumerate() {
            let bit = mask >> j & 1 == 1;
            clause.push(if bit { !l } else { l });
        }
        if let Some(g) = guard {
            clause.push(!g);
        }
        sink.push_clause(&clause);
    }
}

/// CNF clauses, native parity constraints and a projection set.
///
/// Cloning yields an independent formula; this is how scratch copies for
/// hypothetical constraints are made.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Formula {
    num_vars: u32,
    clauses: Vec<Clause>,
    xors: Vec<XorConstraint>,
    projection: BTreeSet<Var>,
}

impl Formula {
    pub fn new() -> Formula {
        Formula::default()
    }

    /// A formula with `n` variables already allocated and no constraints.
    pub fn with_vars(n: u32) -> Formula {
        Formula {
            num_vars: n,
            ..Formula::default()
        }
    }

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars)
    }

    pub fn new_vars(&mut self, count: usize) -> Vec<Var> {
        (0..count).map(|_| self.new_var()).collect()
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (1..=self.num_vars).map(Var)
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn xors(&self) -> &[XorConstraint] {
        &self.xors
    }

    pub fn projection(&self) -> &BTreeSet<Var> {
        &self.projection
    }

    pub fn is_allocated(&self, var: Var) -> bool {
        var.0 >= 1 && var.0 <= self.num_vars
    }

    /// Adds a normalized clause. Tautologies are dropped and `false` is
    /// returned for them.
    ///
    /// Panics if a literal mentions an unallocated variable.
    pub fn add_clause(&mut self, lits: impl IntoIterator<Item = Lit>) -> bool {
        match Clause::new(lits) {
            Some(clause) => {
                for l in clause.lits() {
                    assert!(self.is_allocated(l.var()), "variable {} is not allocated", l.var());
                }
                self.clauses.push(clause);
                true
            }
            None => false,
        }
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }

    /// Stores a parity constraint natively; lower it with
    /// [`Formula::materialize_xors`] or let the solver do it.
    pub fn add_xor(&mut self, xor: XorConstraint) {
        for &v in xor.vars() {
            assert!(self.is_allocated(v), "variable {v} is not allocated");
        }
        self.xors.push(xor);
    }

    /// Adds the CNF lowering of `xor` directly. Auxiliary variables are fresh
    /// and never projected. An empty odd-parity constraint adds the empty
    /// clause.
    pub fn add_xor_as_cnf(&mut self, xor: &XorConstraint, chunk_size: usize) {
        for &v in xor.vars() {
            assert!(self.is_allocated(v), "variable {v} is not allocated");
        }
        lower_xor(self, xor, chunk_size, None);
    }

    /// Lowers every stored parity constraint to CNF.
    pub fn materialize_xors(&mut self, chunk_size: usize) {
        let xors = std::mem::take(&mut self.xors);
        for xor in &xors {
            lower_xor(self, xor, chunk_size, None);
        }
    }

    pub fn add_to_projection(&mut self, var: Var) {
        assert!(self.is_allocated(var), "variable {var} is not allocated");
        self.projection.insert(var);
    }

    pub fn set_projection(&mut self, vars: impl IntoIterator<Item = Var>) {
        self.projection.clear();
        for v in vars {
            self.add_to_projection(v);
        }
    }

    /// Appends a copy of `other`'s clauses and parity constraints with every
    /// variable shifted past the current allocation. Returns the offset added
    /// to `other`'s variable indices. Projection is not copied.
    pub fn append_renamed(&mut self, other: &Formula) -> u32 {
        let offset = self.num_vars;
        self.num_vars += other.num_vars;
        let shift = |l: Lit| Lit::new(Var(l.var().0 + offset), l.is_positive());
        for c in &other.clauses {
            self.clauses.push(Clause {
                lits: c.lits.iter().map(|&l| shift(l)).collect(),
            });
        }
        for x in &other.xors {
            self.xors.push(XorConstraint {
                vars: x.vars.iter().map(|v| Var(v.0 + offset)).collect(),
                parity: x.parity,
            });
        }
        offset
    }

    /// Evaluates every clause and parity constraint under a total assignment.
    pub fn is_satisfied_by(&self, value: impl Fn(Var) -> bool) -> bool {
        self.clauses.iter().all(|c| c.is_satisfied_by(&value))
            && self.xors.iter().all(|x| x.is_satisfied_by(&value))
    }
}

impl ClauseSink for Formula {
    fn fresh_var(&mut self) -> Var {
        self.new_var()
    }

    fn push_clause(&mut self, lits: &[Lit]) {
        self.add_clause(lits.iter().copied());
    }
}
