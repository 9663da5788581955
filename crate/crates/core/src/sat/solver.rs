//! Incremental conflict-driven clause-learning solver.
//!
//! Two watched literals with blocker literals, first-UIP learning with basic
//! minimization, Luby restarts, LBD-guided learnt clause reduction and
//! MiniSat-style assumptions. Clauses may be added between `solve` calls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::{lower_xor, ClauseSink, Formula, Lit, Var};

use super::SolverConfig;

type CRef = u32;

const RESTART_BASE: u64 = 100;
const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f32 = 0.999;

/// Which variable the solver decides on next.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Branching {
    /// Lowest unassigned variable, positive phase first.
    Static,
    /// Conflict-activity ordering (VSIDS) with phase saving; ties go to the
    /// lowest variable, so the order is still fully deterministic.
    #[default]
    Activity,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub solves: u64,
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub restarts: u64,
}

/// The conflict budget of a single `solve` call ran out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BudgetExhausted {
    pub conflicts: u64,
}

#[derive(Clone, Debug)]
struct ClauseData {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    lbd: u32,
    activity: f32,
}

#[derive(Clone, Copy, Debug)]
struct Watcher {
    cref: CRef,
    blocker: Lit,
}

/// Binary max-heap of variables keyed by activity, ties to the lower index.
#[derive(Clone, Debug, Default)]
struct VarOrder {
    heap: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl VarOrder {
    fn better(act: &[f64], a: u32, b: u32) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn grow(&mut self, n: usize) {
        self.pos.resize(n + 1, None);
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize].is_some()
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v as usize] = Some(self.heap.len());
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if let Some(i) = self.pos[v as usize] {
            self.sift_up(i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0);
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.pos[self.heap[0] as usize] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if !Self::better(act, v, p) {
                break;
            }
            self.heap[i] = p;
            self.pos[p as usize] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && Self::better(act, self.heap[r], self.heap[l]) { r } else { l };
            if !Self::better(act, self.heap[c], v) {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = Some(i);
            i = c;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }
}

#[derive(Clone, Debug)]
pub struct Solver {
    config: SolverConfig,
    num_vars: u32,
    clauses: Vec<ClauseData>,
    learnts: Vec<CRef>,
    num_deleted: usize,
    num_original: usize,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<CRef>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f32,
    order: VarOrder,
    polarity: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    model: Vec<bool>,
    simp_trail: usize,
    max_learnts: f64,
    stats: SolverStats,
    rng: Option<ChaCha8Rng>,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new(SolverConfig::default())
    }
}

impl Solver {
    pub fn new(config: SolverConfig) -> Solver {
        let rng = config.seed.map(ChaCha8Rng::seed_from_u64);
        let mut s = Solver {
            config,
            num_vars: 0,
            clauses: Vec::new(),
            learnts: Vec::new(),
            num_deleted: 0,
            num_original: 0,
            watches: vec![Vec::new(), Vec::new()],
            assigns: vec![None],
            level: vec![0],
            reason: vec![None],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0],
            var_inc: 1.0,
            cla_inc: 1.0,
            order: VarOrder::default(),
            polarity: vec![true],
            seen: vec![false],
            ok: true,
            model: Vec::new(),
            simp_trail: 0,
            max_learnts: 2000.0,
            stats: SolverStats::default(),
            rng,
        };
        s.order.grow(0);
        s
    }

    /// Loads every clause of `formula` and lowers its parity constraints.
    /// Auxiliary variables are allocated after the formula's own variables.
    pub fn from_formula(formula: &Formula, config: SolverConfig) -> Solver {
        let chunk = config.xor_chunk;
        let mut s = Solver::new(config);
        while s.num_vars < formula.num_vars() {
            s.new_var();
        }
        for c in formula.clauses() {
            s.add_clause(c.lits());
        }
        for x in formula.xors() {
            lower_xor(&mut s, x, chunk, None);
        }
        s
    }

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        let n = self.num_vars as usize;
        self.watches.resize_with(2 * n + 2, Vec::new);
        self.assigns.push(None);
        self.level.push(0);
        self.reason.push(None);
        let (act, phase) = match self.rng.as_mut() {
            Some(rng) => (rng.gen::<f64>() * 1e-5, rng.gen::<bool>()),
            None => (0.0, true),
        };
        self.activity.push(act);
        self.polarity.push(phase);
        self.seen.push(false);
        self.order.grow(n);
        self.order.insert(n as u32, &self.activity);
        Var::new(n as u32)
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// `false` once the clause set is unsatisfiable without assumptions.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    /// Model of the last satisfiable call, indexed by `var - 1`.
    pub fn model(&self) -> &[bool] {
        &self.model
    }

    pub fn model_value(&self, v: Var) -> bool {
        self.model[v.index() as usize - 1]
    }

    #[inline]
    fn value(&self, l: Lit) -> Option<bool> {
        self.assigns[l.var().index() as usize].map(|b| b == l.is_positive())
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause at the root level. Returns `false` if the solver is now
    /// known to be unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        debug_assert_eq!(self.decision_level(), 0);
        let mut sorted = lits.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut out = Vec::with_capacity(sorted.len());
        for (i, &l) in sorted.iter().enumerate() {
            assert!(
                l.var().index() >= 1 && l.var().index() <= self.num_vars,
                "literal {l} mentions an unallocated variable"
            );
            if i > 0 && sorted[i - 1].var() == l.var() {
                return true;
            }
            match self.value(l) {
                Some(true) => return true,
                Some(false) => {}
                None => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
            }
            1 => {
                self.enqueue(out[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cref = self.alloc(out, false, 0);
                self.attach(cref);
                self.num_original += 1;
            }
        }
        self.ok
    }

    fn alloc(&mut self, lits: Vec<Lit>, learnt: bool, lbd: u32) -> CRef {
        let cref = self.clauses.len() as CRef;
        self.clauses.push(ClauseData {
            lits,
            learnt,
            deleted: false,
            lbd,
            activity: 0.0,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn attach(&mut self, cref: CRef) {
        let c = &self.clauses[cref as usize];
        let (a, b) = (c.lits[0], c.lits[1]);
        self.watches[a.code()].push(Watcher { cref, blocker: b });
        self.watches[b.code()].push(Watcher { cref, blocker: a });
    }

    fn enqueue(&mut self, l: Lit, reason: Option<CRef>) {
        let v = l.var().index() as usize;
        debug_assert!(self.assigns[v].is_none());
        self.assigns[v] = Some(l.is_positive());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if one is found.
    fn propagate(&mut self) -> Option<CRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut i = 0;
            let mut j = 0;
            'watchers: while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == Some(true) {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref as usize;
                if self.clauses[cref].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                if first != w.blocker && self.value(first) == Some(true) {
                    ws[j] = Watcher {
                        cref: w.cref,
                        blocker: first,
                    };
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref].lits.len();
                for k in 2..len {
                    let l = self.clauses[cref].lits[k];
                    if self.value(l) != Some(false) {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[l.code()].push(Watcher {
                            cref: w.cref,
                            blocker: first,
                        });
                        continue 'watchers;
                    }
                }
                ws[j] = w;
                j += 1;
                if self.value(first) == Some(false) {
                    conflict = Some(w.cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                    self.qhead = self.trail.len();
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        if self.config.branching != Branching::Activity {
            return;
        }
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.bumped(v as u32, &self.activity);
    }

    fn bump_clause(&mut self, cref: CRef) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &r in &self.learnts {
                self.clauses[r as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first, a literal of the backtrack level second) and the
    /// backtrack level.
    fn analyze(&mut self, mut confl: CRef) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Var::new(1).positive()];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let dl = self.decision_level();
        loop {
            self.bump_clause(confl);
            let start = usize::from(p.is_some());
            let len = self.clauses[confl as usize].lits.len();
            for k in start..len {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var().index() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= dl {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index() as usize] {
                    break;
                }
            }
            let pl = self.trail[index];
            let v = pl.var().index() as usize;
            self.seen[v] = false;
            path -= 1;
            p = Some(pl);
            if path == 0 {
                break;
            }
            confl = self.reason[v].expect("implied literal without a reason");
        }
        learnt[0] = !p.unwrap();

        // drop literals whose reason is subsumed by the rest of the clause
        let marked = learnt.clone();
        let mut kept = 1;
        for i in 1..learnt.len() {
            let q = learnt[i];
            let v = q.var().index() as usize;
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..].iter().all(|l| {
                    let u = l.var().index() as usize;
                    self.seen[u] || self.level[u] == 0
                }),
            };
            if !redundant {
                learnt[kept] = q;
                kept += 1;
            }
        }
        for l in &marked {
            self.seen[l.var().index() as usize] = false;
        }
        learnt.truncate(kept);

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().index() as usize] > self.level[learnt[max_i].var().index() as usize] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().index() as usize]
        };
        (learnt, bt)
    }

    fn lbd(&mut self, lits: &[Lit]) -> u32 {
        let mut levels: Vec<u32> = lits.iter().map(|l| self.level[l.var().index() as usize]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for k in (lim..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = l.var().index() as usize;
            self.assigns[v] = None;
            self.reason[v] = None;
            if self.config.branching == Branching::Activity {
                self.polarity[v] = l.is_positive();
            }
            self.order.insert(v as u32, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = self.trail.len();
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assigns[v as usize].is_none() {
                return Some(Var::new(v).lit(self.polarity[v as usize]));
            }
        }
        None
    }

    fn locked(&self, cref: CRef) -> bool {
        let c = &self.clauses[cref as usize];
        let v = c.lits[0].var().index() as usize;
        self.reason[v] == Some(cref) && self.value(c.lits[0]) == Some(true)
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<CRef> = self.learnts.clone();
        cands.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            cb.lbd
                .cmp(&ca.lbd)
                .then(ca.activity.partial_cmp(&cb.activity).unwrap_or(std::cmp::Ordering::Equal))
        });
        let target = cands.len() / 2;
        let mut removed = 0;
        for cref in cands {
            if removed >= target {
                break;
            }
            let c = &self.clauses[cref as usize];
            if c.lbd <= 2 || c.lits.len() <= 2 || self.locked(cref) {
                continue;
            }
            self.clauses[cref as usize].deleted = true;
            self.num_deleted += 1;
            removed += 1;
        }
        self.purge();
    }

    /// Removes clauses satisfied at the root level.
    fn simplify(&mut self) {
        debug_assert_eq!(self.decision_level(), 0);
        if self.trail.len() == self.simp_trail {
            return;
        }
        for l in &self.trail {
            self.reason[l.var().index() as usize] = None;
        }
        for cref in 0..self.clauses.len() {
            if self.clauses[cref].deleted {
                continue;
            }
            let sat = self.clauses[cref].lits.iter().any(|&l| self.value(l) == Some(true));
            if sat {
                if !self.clauses[cref].learnt {
                    self.num_original -= 1;
                }
                self.clauses[cref].deleted = true;
                self.num_deleted += 1;
            }
        }
        self.simp_trail = self.trail.len();
        self.purge();
    }

    fn purge(&mut self) {
        let clauses = &self.clauses;
        for ws in self.watches.iter_mut() {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
        self.learnts.retain(|&r| !clauses[r as usize].deleted);
        if self.num_deleted * 2 > self.clauses.len() {
            self.collect_garbage();
        }
    }

    fn collect_garbage(&mut self) {
        let mut map = vec![CRef::MAX; self.clauses.len()];
        let old = std::mem::take(&mut self.clauses);
        for (i, c) in old.into_iter().enumerate() {
            if !c.deleted {
                map[i] = self.clauses.len() as CRef;
                self.clauses.push(c);
            }
        }
        for ws in self.watches.iter_mut() {
            for w in ws.iter_mut() {
                w.cref = map[w.cref as usize];
            }
        }
        for r in self.reason.iter_mut() {
            if let Some(c) = *r {
                let m = map[c as usize];
                *r = (m != CRef::MAX).then_some(m);
            }
        }
        for r in self.learnts.iter_mut() {
            *r = map[*r as usize];
        }
        self.num_deleted = 0;
    }

    /// Decides satisfiability under `assumptions`. `Ok(true)` leaves a model
    /// in [`Solver::model`]. The solver is back at the root level afterwards,
    /// ready for more clauses.
    pub fn solve(&mut self, assumptions: &[Lit]) -> Result<bool, BudgetExhausted> {
        self.stats.solves += 1;
        self.model.clear();
        if !self.ok {
            return Ok(false);
        }
        for a in assumptions {
            assert!(a.var().index() >= 1 && a.var().index() <= self.num_vars, "assumption {a} unallocated");
        }
        self.max_learnts = self.max_learnts.max(self.num_original as f64 / 3.0);
        let start_conflicts = self.stats.conflicts;
        let mut restart = 0u32;
        let result = loop {
            let limit = luby(restart) * RESTART_BASE;
            match self.search(limit, assumptions, start_conflicts) {
                Ok(Some(sat)) => break Ok(sat),
                Ok(None) => {
                    restart += 1;
                    self.stats.restarts += 1;
                    self.max_learnts *= 1.05;
                }
                Err(e) => break Err(e),
            }
        };
        self.cancel_until(0);
        result
    }

    fn search(&mut self, limit: u64, assumptions: &[Lit], start: u64) -> Result<Option<bool>, BudgetExhausted> {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Ok(Some(false));
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let lbd = self.lbd(&learnt);
                    let asserting = learnt[0];
                    let cref = self.alloc(learnt, true, lbd);
                    self.attach(cref);
                    self.bump_clause(cref);
                    self.enqueue(asserting, Some(cref));
                }
                self.var_inc /= VAR_DECAY;
                self.cla_inc /= CLAUSE_DECAY;
                if let Some(budget) = self.config.conflict_budget {
                    let used = self.stats.conflicts - start;
                    if used >= budget {
                        return Err(BudgetExhausted { conflicts: used });
                    }
                }
                continue;
            }
            if conflicts >= limit {
                self.cancel_until(0);
                return Ok(None);
            }
            if self.decision_level() == 0 {
                self.simplify();
            }
            if self.learnts.len() as f64 >= self.max_learnts + self.trail.len() as f64 {
                self.reduce_db();
            }
            let mut next = None;
            while (self.decision_level() as usize) < assumptions.len() {
                let a = assumptions[self.decision_level() as usize];
                match self.value(a) {
                    Some(true) => self.trail_lim.push(self.trail.len()),
                    Some(false) => return Ok(Some(false)),
                    None => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let next = match next {
                Some(l) => l,
                None => match self.pick_branch() {
                    Some(l) => {
                        self.stats.decisions += 1;
                        l
                    }
                    None => {
                        self.model = (1..=self.num_vars as usize)
                            .map(|v| self.assigns[v].expect("total assignment"))
                            .collect();
                        return Ok(Some(true));
                    }
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(next, None);
        }
    }
}

impl ClauseSink for Solver {
    fn fresh_var(&mut self) -> Var {
        self.new_var()
    }

    fn push_clause(&mut self, lits: &[Lit]) {
        self.add_clause(lits);
    }
}

/// Luby restart sequence 1 1 2 1 1 2 4 1 1 2 ...
fn luby(i: u32) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < u64::from(i) + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = u64::from(i);
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1u64 << seq
}
