//! Hashing-based approximate projected counting.
//!
//! Each round draws random parity constraints over the projection, finds the
//! smallest number `m` of them that leaves fewer than `pivot` projected
//! models in the cell, and reports `cells * 2^m`. The result is the median
//! over all rounds.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::{lower_xor, Formula, Lit, Var, XorConstraint};
use crate::sat::{bounded_enumerate, Solver, SolverConfig};

use super::{derive_seed, CountError, CountEstimate};

/// Tolerance and confidence of the approximate counter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for ApproxParams {
    fn default() -> Self {
        ApproxParams {
            epsilon: 0.8,
            delta: 0.2,
        }
    }
}

impl ApproxParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<ApproxParams, CountError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(CountError::BadEpsilon(epsilon));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CountError::BadDelta(delta));
        }
        Ok(ApproxParams { epsilon, delta })
    }

    /// Cell-size threshold.
    pub fn pivot(&self) -> usize {
        let e = self.epsilon;
        (9.84 * (1.0 + e / (1.0 + e)) * (1.0 + 1.0 / e).powi(2)).ceil() as usize
    }

    /// Number of independent hashing rounds.
    pub fn rounds(&self) -> usize {
        (17.0 * (3.0 / self.delta).log2()).ceil() as usize
    }
}

/// Approximate projected count of `formula`. The formula itself is not
/// touched; all hashing happens inside solver copies.
pub fn approx_count(
    formula: &Formula,
    params: ApproxParams,
    seed: u64,
    solver: &SolverConfig,
) -> Result<CountEstimate, CountError> {
    let params = ApproxParams::new(params.epsilon, params.delta)?;
    if formula.projection().is_empty() {
        return Err(CountError::EmptyProjection);
    }
    let proj: Vec<Var> = formula.projection().iter().copied().collect();
    let pivot = params.pivot();
    let mut base = Solver::from_formula(formula, solver.clone());
    let found = bounded_enumerate(&mut base, &[], &proj, pivot, |_| {})?;
    if found < pivot {
        return Ok(CountEstimate::exact(found as u64, params, seed));
    }

    let rounds = params.rounds();
    let mut results: Vec<CountEstimate> = Vec::with_capacity(rounds);
    let mut hint = 1;
    for r in 0..rounds {
        let mut round = Round {
            solver: base.clone(),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(&[seed, r as u64])),
            proj: &proj,
            guards: Vec::new(),
            cells: BTreeMap::new(),
            pivot,
            chunk: solver.xor_chunk,
        };
        let (m, cells) = round.search(hint)?;
        hint = m;
        results.push(CountEstimate {
            cells: cells as u64,
            exponent: m as u32,
            epsilon: params.epsilon,
            delta: params.delta,
            seed,
            exact: false,
        });
    }
    results.sort_by(|a, b| a.cmp_value(b));
    let mut median = results.swap_remove(rounds / 2);
    median.seed = seed;
    Ok(median)
}

struct Round<'a> {
    solver: Solver,
    rng: ChaCha8Rng,
    proj: &'a [Var],
    /// Activation literal of each hash constraint drawn so far, in order.
    guards: Vec<Lit>,
    cells: BTreeMap<usize, usize>,
    pivot: usize,
    chunk: usize,
}

impl Round<'_> {
    /// Projected models in the cell cut out by the first `m` hashes,
    /// counted up to the pivot.
    fn cell(&mut self, m: usize) -> Result<usize, CountError> {
        if let Some(&c) = self.cells.get(&m) {
            return Ok(c);
        }
        while self.guards.len() < m {
            let vars: Vec<Var> = self.proj.iter().copied().filter(|_| self.rng.gen_bool(0.5)).collect();
            let parity = self.rng.gen::<bool>();
            let guard = self.solver.new_var().positive();
            lower_xor(&mut self.solver, &XorConstraint::new(vars, parity), self.chunk, Some(guard));
            self.guards.push(guard);
        }
        let assumptions = self.guards[..m].to_vec();
        let c = bounded_enumerate(&mut self.solver, &assumptions, self.proj, self.pivot, |_| {})?;
        self.cells.insert(m, c);
        Ok(c)
    }

    fn small(&mut self, m: usize) -> Result<bool, CountError> {
        Ok(self.cell(m)? < self.pivot)
    }

    /// Smallest `m` whose cell is below the pivot, starting the search at
    /// `hint`. Zero hashes are known to give a big cell.
    fn search(&mut self, hint: usize) -> Result<(usize, usize), CountError> {
        let max_m = self.proj.len();
        let mut lo = 0;
        let mut hi;
        let start = hint.clamp(1, max_m);
        if self.small(start)? {
            hi = start;
            let mut step = 1;
            while hi > lo + 1 {
                let probe = hi.saturating_sub(step).max(lo + 1);
                if self.small(probe)? {
                    hi = probe;
                    step *= 2;
                } else {
                    lo = probe;
                }
            }
        } else {
            lo = start;
            let mut step = 1;
            loop {
                if lo == max_m {
                    // every hash used and still crowded: report the last cell
                    return Ok((max_m, self.cell(max_m)?));
                }
                let probe = (lo + step).min(max_m);
                if self.small(probe)? {
                    hi = probe;
                    break;
                }
                lo = probe;
                step *= 2;
            }
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.small(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((hi, self.cell(hi)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameters() {
        let p = ApproxParams::default();
        assert_eq!(p.pivot(), 72);
        assert_eq!(p.rounds(), 67);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ApproxParams::new(0.0, 0.2).is_err());
        assert!(ApproxParams::new(0.8, 1.0).is_err());
        assert!(ApproxParams::new(0.8, 0.0).is_err());
    }

    #[test]
    fn small_counts_take_the_exact_path() {
        let mut f = Formula::with_vars(5);
        f.set_projection((1..=5).map(Var::new));
        let c = approx_count(&f, ApproxParams::default(), 3, &SolverConfig::default()).unwrap();
        assert!(c.exact);
        assert_eq!(c.to_u128(), Some(32));
    }

    #[test]
    fn unsat_is_zero() {
        let mut f = Formula::with_vars(1);
        f.add_clause([Lit::from_dimacs(1)]);
        f.add_clause([Lit::from_dimacs(-1)]);
        f.set_projection([Var::new(1)]);
        let c = approx_count(&f, ApproxParams::default(), 0, &SolverConfig::default()).unwrap();
        assert_eq!(c.to_u128(), Some(0));
        assert!(c.exact);
    }

    #[test]
    fn deterministic_per_seed_and_formula_untouched() {
        let mut f = Formula::with_vars(10);
        f.set_projection((1..=10).map(Var::new));
        let before = f.clone();
        let a = approx_count(&f, ApproxParams::default(), 11, &SolverConfig::default()).unwrap();
        let b = approx_count(&f, ApproxParams::default(), 11, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(!a.exact);
        assert_eq!(f, before);
    }
}
