//! Projected model counting, exact and approximate.

mod approx;
mod exact;

use std::cmp::Ordering;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::cnf::Formula;
use crate::encode::{add_observation, EncodeError, VarLayout};
use crate::sat::{SatError, SolverConfig};
use crate::tree::Input;

pub use approx::{approx_count, ApproxParams};
pub use exact::{exact_count_projected, ExactCount};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountError {
    #[error("projected counting needs a nonempty projection set")]
    EmptyProjection,
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("exact counter gave up after {0} search nodes")]
    ExactBudget(u64),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// A projected model count of the form `cells * 2^exponent`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountEstimate {
    pub cells: u64,
    pub exponent: u32,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    /// The value is the true projected count.
    pub exact: bool,
}

impl CountEstimate {
    pub fn exact(count: u64, params: ApproxParams, seed: u64) -> CountEstimate {
        CountEstimate {
            cells: count,
            exponent: 0,
            epsilon: params.epsilon,
            delta: params.delta,
            seed,
            exact: true,
        }
    }

    pub fn value(&self) -> BigUint {
        BigUint::from(self.cells) << self.exponent
    }

    pub fn to_u128(&self) -> Option<u128> {
        if self.cells == 0 {
            return Some(0);
        }
        let bits = 64 - self.cells.leading_zeros() + self.exponent;
        (bits <= 128).then(|| u128::from(self.cells) << self.exponent)
    }

    pub fn as_f64(&self) -> f64 {
        self.cells as f64 * 2f64.powi(self.exponent as i32)
    }

    pub fn cmp_value(&self, other: &CountEstimate) -> Ordering {
        match (self.to_u128(), other.to_u128()) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => self.value().cmp(&other.value()),
        }
    }

    /// Whether the value lies within a factor `1 + epsilon` of `truth`.
    pub fn within_band(&self, truth: f64) -> bool {
        let v = self.as_f64();
        let f = 1.0 + self.epsilon;
        v >= truth / f && v <= truth * f
    }
}

impl std::fmt::Display for CountEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.cells)
        } else {
            write!(f, "{}*2^{}", self.cells, self.exponent)
        }
    }
}

/// Mixes several integers into one RNG seed (splitmix64 finalizer).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterConfig {
    pub approx: ApproxParams,
    /// Counts below this are computed exactly; 0 disables the exact path.
    pub exact_cap: u64,
    /// Search-node limit of the exact counter; past it the approximate
    /// counter takes over.
    pub exact_budget: Option<u64>,
    pub solver: SolverConfig,
}

impl Default for CounterConfig {
    fn default() -> Self {
        CounterConfig {
            approx: ApproxParams::default(),
            exact_cap: 10_000,
            exact_budget: Some(200_000),
            solver: SolverConfig::default(),
        }
    }
}

/// Exact count when it is below the cap, approximate otherwise.
pub fn count(formula: &Formula, config: &CounterConfig, seed: u64) -> Result<CountEstimate, CountError> {
    if config.exact_cap > 0 {
        match exact_count_projected(formula, config.exact_cap, config.exact_budget) {
            Ok(ExactCount::Count(c)) => return Ok(CountEstimate::exact(c, config.approx, seed)),
            Ok(ExactCount::Overflow(_)) | Err(CountError::ExactBudget(_)) => {}
            Err(e) => return Err(e),
        }
    }
    approx_count(formula, config.approx, seed, &config.solver)
}

/// Count of the version space further restricted to trees with `h(x) = b`.
/// Works on a copy; `formula` and `layout` are unchanged.
pub fn count_under_hypothesis(
    formula: &Formula,
    layout: &VarLayout,
    x: &Input,
    b: bool,
    config: &CounterConfig,
    seed: u64,
) -> Result<CountEstimate, CountError> {
    let mut f = formula.clone();
    let mut l = layout.clone();
    add_observation(&mut f, &mut l, x, b)?;
    count(&f, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::encode_base;
    use crate::tree::TreeSpec;

    fn exact_of(f: &Formula) -> u64 {
        match exact_count_projected(f, u64::MAX, None).unwrap() {
            ExactCount::Count(c) => c,
            ExactCount::Overflow(_) => unreachable!(),
        }
    }

    #[test]
    fn base_encodings() {
        let (f, _) = encode_base(TreeSpec::new(3, 2).unwrap());
        assert_eq!(exact_of(&f), 432);
        let (f, _) = encode_base(TreeSpec::new(4, 2).unwrap());
        assert_eq!(exact_of(&f), 1024);
        let (f, _) = encode_base(TreeSpec::new(4, 3).unwrap());
        assert_eq!(exact_of(&f), 4_194_304);
    }

    #[test]
    fn hypothesis_counts_split_the_base_space() {
        let spec = TreeSpec::new(3, 2).unwrap();
        let (f, layout) = encode_base(spec);
        let cfg = CounterConfig::default();
        for b in [false, true] {
            let c = count_under_hypothesis(&f, &layout, &"000".parse().unwrap(), b, &cfg, 0).unwrap();
            assert!(c.exact);
            assert_eq!(c.to_u128(), Some(216));
        }
        assert_eq!(f.num_clauses(), 12);
    }

    #[test]
    fn value_arithmetic() {
        let c = CountEstimate {
            cells: 40,
            exponent: 3,
            epsilon: 0.8,
            delta: 0.2,
            seed: 0,
            exact: false,
        };
        assert_eq!(c.to_u128(), Some(320));
        assert_eq!(c.value(), BigUint::from(320u32));
        assert!(c.within_band(432.0));
        assert!(!c.within_band(600.0));
        let huge = CountEstimate { exponent: 130, ..c.clone() };
        assert_eq!(huge.to_u128(), None);
        assert_eq!(huge.cmp_value(&c), Ordering::Greater);
        assert_eq!(c.to_string(), "40*2^3");
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_ne!(derive_seed(&[0]), derive_seed(&[0, 0]));
        assert_eq!(derive_seed(&[5, 6]), derive_seed(&[5, 6]));
    }
}
