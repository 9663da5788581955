//! Exact projected model counting by DPLL with component decomposition and
//! caching. Only projected variables are branched on; once a component has
//! no projected variables left it contributes 1 if satisfiable, else 0.

use std::collections::HashMap;

use crate::cnf::{Formula, Lit};

use super::CountError;

type Cls = Vec<Lit>;

/// Outcome of an exact count against a cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactCount {
    Count(u64),
    /// The count is at least the cap.
    Overflow(u64),
}

/// Projected count of `formula`, or `Overflow(cap)` when it is `>= cap`.
/// `node_budget` bounds the number of search nodes.
pub fn exact_count_projected(formula: &Formula, cap: u64, node_budget: Option<u64>) -> Result<ExactCount, CountError> {
    if formula.projection().is_empty() {
        return Err(CountError::EmptyProjection);
    }
    let mut f = formula.clone();
    f.materialize_xors(crate::cnf::DEFAULT_XOR_CHUNK);
    let mut proj = vec![false; f.num_vars() as usize + 1];
    for v in f.projection() {
        proj[v.index() as usize] = true;
    }
    let mut counter = Counter {
        proj: &proj,
        cache: HashMap::new(),
        sat_cache: HashMap::new(),
        nodes: 0,
        budget: node_budget.unwrap_or(u64::MAX),
    };
    let clauses: Vec<Cls> = f.clauses().iter().map(|c| c.lits().to_vec()).collect();
    let total = counter.count_residual(clauses, &[], formula.projection().len())?;
    Ok(if total >= u128::from(cap) {
        ExactCount::Overflow(cap)
    } else {
        ExactCount::Count(total as u64)
    })
}

struct Counter<'a> {
    proj: &'a [bool],
    cache: HashMap<Vec<u32>, u128>,
    sat_cache: HashMap<Vec<u32>, bool>,
    nodes: u64,
    budget: u64,
}

fn pow2(k: usize) -> u128 {
    if k >= 128 {
        u128::MAX
    } else {
        1u128 << k
    }
}

fn key(clauses: &[Cls]) -> Vec<u32> {
    let mut out = Vec::with_capacity(clauses.iter().map(|c| c.len() + 1).sum());
    for c in clauses {
        out.extend(c.iter().map(|l| l.code() as u32));
        out.push(u32::MAX);
    }
    out
}

/// Unit propagation by repeated passes. Returns the residual clauses and
/// the literals fixed on the way, or `None` on conflict.
fn propagate(mut clauses: Vec<Cls>, decisions: &[Lit]) -> Option<(Vec<Cls>, Vec<Lit>)> {
    let mut assigned: HashMap<u32, bool> = HashMap::new();
    let mut fixed: Vec<Lit> = Vec::new();
    let mut pending: Vec<Lit> = decisions.to_vec();
    loop {
        for l in pending.drain(..) {
            match assigned.get(&l.var().index()) {
                Some(&b) if b != l.is_positive() => return None,
                Some(_) => {}
                None => {
                    assigned.insert(l.var().index(), l.is_positive());
                    fixed.push(l);
                }
            }
        }
        let mut next = Vec::with_capacity(clauses.len());
        for c in clauses {
            let mut sat = false;
            let mut rest = Vec::with_capacity(c.len());
            for &l in &c {
                match assigned.get(&l.var().index()) {
                    Some(&b) if b == l.is_positive() => {
                        sat = true;
                        break;
                    }
                    Some(_) => {}
                    None => rest.push(l),
                }
            }
            if sat {
                continue;
            }
            match rest.len() {
                0 => return None,
                1 => pending.push(rest[0]),
                _ => next.push(rest),
            }
        }
        clauses = next;
        if pending.is_empty() {
            return Some((clauses, fixed));
        }
    }
}

/// Drops every clause containing a pure literal over a hidden variable,
/// repeating until none is left. Hidden variables are only asked to exist,
/// so setting a pure one to its satisfying value loses no projected model.
fn eliminate_pure_hidden(mut clauses: Vec<Cls>, proj: &[bool]) -> Vec<Cls> {
    // bit 0: seen positive, bit 1: seen negative
    let mut polarity: HashMap<u32, u8> = HashMap::new();
    loop {
        polarity.clear();
        for l in clauses.iter().flatten() {
            if !proj[l.var().index() as usize] {
                *polarity.entry(l.var().index()).or_default() |= if l.is_positive() { 1 } else { 2 };
            }
        }
        let before = clauses.len();
        clauses.retain(|c| {
            !c.iter()
                .any(|l| !proj[l.var().index() as usize] && polarity[&l.var().index()] != 3)
        });
        if clauses.len() == before {
            return clauses;
        }
    }
}

/// Splits clauses into variable-disjoint groups, each sorted canonically.
fn components(clauses: Vec<Cls>) -> Vec<Vec<Cls>> {
    let mut index: HashMap<u32, usize> = HashMap::new();
    for c in &clauses {
        for l in c {
            let n = index.len();
            index.entry(l.var().index()).or_insert(n);
        }
    }
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in &clauses {
        let a = index[&c[0].var().index()];
        for l in &c[1..] {
            let b = index[&l.var().index()];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: HashMap<usize, Vec<Cls>> = HashMap::new();
    for c in clauses {
        let root = find(&mut parent, index[&c[0].var().index()]);
        groups.entry(root).or_default().push(c);
    }
    let mut out: Vec<Vec<Cls>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort_unstable();
    out
}

impl Counter<'_> {
    fn is_proj(&self, l: Lit) -> bool {
        self.proj[l.var().index() as usize]
    }

    fn proj_vars(&self, clauses: &[Cls]) -> Vec<u32> {
        let mut vs: Vec<u32> = clauses
            .iter()
            .flatten()
            .filter(|&&l| self.is_proj(l))
            .map(|l| l.var().index())
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    fn tick(&mut self) -> Result<(), CountError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            Err(CountError::ExactBudget(self.budget))
        } else {
            Ok(())
        }
    }

    /// Count over `scope` projected variables after propagating `decisions`
    /// through `clauses`; scope variables that drop out unassigned are free.
    fn count_residual(&mut self, clauses: Vec<Cls>, decisions: &[Lit], scope: usize) -> Result<u128, CountError> {
        let Some((residual, fixed)) = propagate(clauses, decisions) else {
            return Ok(0);
        };
        let residual = eliminate_pure_hidden(residual, self.proj);
        let fixed_proj = fixed.iter().filter(|&&l| self.is_proj(l)).count();
        let remaining = self.proj_vars(&residual).len();
        let mut total = pow2(scope - fixed_proj - remaining);
        for comp in components(residual) {
            if total == 0 {
                break;
            }
            total = total.saturating_mul(self.count_component(comp)?);
        }
        Ok(total)
    }

    fn count_component(&mut self, clauses: Vec<Cls>) -> Result<u128, CountError> {
        let k = key(&clauses);
        if let Some(&c) = self.cache.get(&k) {
            return Ok(c);
        }
        self.tick()?;
        let pvars = self.proj_vars(&clauses);
        let result = if pvars.is_empty() {
            u128::from(self.satisfiable(clauses)?)
        } else {
            let mut occ: HashMap<u32, usize> = HashMap::new();
            for l in clauses.iter().flatten().filter(|&&l| self.is_proj(l)) {
                *occ.entry(l.var().index()).or_default() += 1;
            }
            let (&v, _) = occ
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .expect("component has projected variables");
            let var = crate::cnf::Var::new(v);
            let pos = self.count_residual(clauses.clone(), &[var.positive()], pvars.len())?;
            let neg = self.count_residual(clauses, &[var.negative()], pvars.len())?;
            pos.saturating_add(neg)
        };
        self.cache.insert(k, result);
        Ok(result)
    }

    fn satisfiable(&mut self, clauses: Vec<Cls>) -> Result<bool, CountError> {
        if clauses.is_empty() {
            return Ok(true);
        }
        let k = key(&clauses);
        if let Some(&b) = self.sat_cache.get(&k) {
            return Ok(b);
        }
        self.tick()?;
        let pick = clauses[0][0];
        let mut result = false;
        for l in [pick, !pick] {
            if let Some((residual, _)) = propagate(clauses.clone(), &[l]) {
                let residual = eliminate_pure_hidden(residual, self.proj);
                let mut all = true;
                for comp in components(residual) {
                    if !self.satisfiable(comp)? {
                        all = false;
                        break;
                    }
                }
                if all {
                    result = true;
                    break;
                }
            }
        }
        self.sat_cache.insert(k, result);
        Ok(result)
    }
}
