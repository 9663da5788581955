//! Full binary decision trees over Boolean features.
//!
//! Nodes are numbered in level order from 1 (root); node `u` has children
//! `2u` (taken when the tested feature is 1) and `2u + 1`. Leaves are numbered
//! left to right from 0. Features are 1-based, matching `x1..xn`.
//!
//! Inputs map to integers with `x1` as the most significant bit, which fixes
//! the row order of truth tables and of the truth-table text format.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest feature count for which truth tables are materialized.
pub const MAX_TABLE_FEATURES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("a tree needs at least one feature")]
    NoFeatures,
    #[error("depth {0} is too large")]
    DepthTooLarge(usize),
    #[error("expected {expected} {what}, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
    #[error("feature index {feature} out of range 1..={n}")]
    FeatureOutOfRange { feature: usize, n: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Shape of the hypothesis space: `n_features` Boolean inputs, full tree of
/// the given depth.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeSpec {
    pub n_features: usize,
    pub depth: usize,
}

impl TreeSpec {
    pub fn new(n_features: usize, depth: usize) -> Result<TreeSpec, TreeError> {
        if n_features == 0 {
            return Err(TreeError::NoFeatures);
        }
        if depth > 20 {
            return Err(TreeError::DepthTooLarge(depth));
        }
        Ok(TreeSpec { n_features, depth })
    }

    pub fn internal_nodes(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn leaves(&self) -> usize {
        1 << self.depth
    }

    /// Internal nodes plus leaves.
    pub fn nodes(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }

    pub fn num_inputs(&self) -> usize {
        1 << self.n_features
    }

    /// Number of syntactically distinct trees: `n^(2^d - 1) * 2^(2^d)`.
    pub fn hypothesis_space_size(&self) -> BigUint {
        let features = BigUint::from(self.n_features).pow(self.internal_nodes() as u32);
        features << self.leaves()
    }

    /// All inputs in truth-table order.
    pub fn inputs(&self) -> impl Iterator<Item = Input> + '_ {
        (0..self.num_inputs()).map(move |i| Input::from_index(self.n_features, i))
    }

    /// Every tree of the space, leaf labels varying fastest.
    pub fn trees(&self) -> impl Iterator<Item = DecisionTree> + '_ {
        let internal = self.internal_nodes();
        let total_feature_choices = self.n_features.pow(internal as u32);
        let spec = *self;
        (0..total_feature_choices).flat_map(move |fc| {
            let mut rest = fc;
            let mut features = vec![0; internal];
            for slot in features.iter_mut().rev() {
                *slot = rest % spec.n_features + 1;
                rest /= spec.n_features;
            }
            (0..1usize << spec.leaves()).map(move |lc| DecisionTree {
                spec,
                node_feature: features.clone(),
                leaf_label: (0..spec.leaves()).map(|j| lc >> (spec.leaves() - 1 - j) & 1 == 1).collect(),
            })
        })
    }
}

/// One input vector; `bits[i]` carries `x_{i+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Input {
    bits: Vec<bool>,
}

impl Input {
    pub fn new(bits: Vec<bool>) -> Input {
        Input { bits }
    }

    /// Decodes `index` with `x1` as the most significant of `n` bits.
    pub fn from_index(n: usize, index: usize) -> Input {
        Input {
            bits: (0..n).map(|i| index >> (n - 1 - i) & 1 == 1).collect(),
        }
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| acc << 1 | usize::from(b))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Value of the 1-based feature `x_feature`.
    pub fn feature(&self, feature: usize) -> bool {
        self.bits[feature - 1]
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for Input {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl FromStr for Input {
    type Err = String;

    fn from_str(s: &str) -> Result<Input, String> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("`{other}` is not a bit")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Input::new)
    }
}

/// A concrete hypothesis: the feature tested at each internal node (level
/// order) and the label of each leaf (left to right).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecisionTree {
    spec: TreeSpec,
    node_feature: Vec<usize>,
    leaf_label: Vec<bool>,
}

impl DecisionTree {
    pub fn new(spec: TreeSpec, node_feature: Vec<usize>, leaf_label: Vec<bool>) -> Result<DecisionTree, TreeError> {
        if node_feature.len() != spec.internal_nodes() {
            return Err(TreeError::Length {
                what: "node features",
                expected: spec.internal_nodes(),
                got: node_feature.len(),
            });
        }
        if leaf_label.len() != spec.leaves() {
            return Err(TreeError::Length {
                what: "leaf labels",
                expected: spec.leaves(),
                got: leaf_label.len(),
            });
        }
        if let Some(&feature) = node_feature.iter().find(|&&f| f == 0 || f > spec.n_features) {
            return Err(TreeError::FeatureOutOfRange {
                feature,
                n: spec.n_features,
            });
        }
        Ok(DecisionTree {
            spec,
            node_feature,
            leaf_label,
        })
    }

    /// Uniform feature at every node and uniform label at every leaf.
    pub fn random(spec: TreeSpec, seed: u64) -> DecisionTree {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let node_feature = (0..spec.internal_nodes())
            .map(|_| rng.gen_range(1..=spec.n_features))
            .collect();
        let leaf_label = (0..spec.leaves()).map(|_| rng.gen::<bool>()).collect();
        DecisionTree {
            spec,
            node_feature,
            leaf_label,
        }
    }

    /// Every leaf labelled `label`, every node testing `x1`.
    pub fn constant(spec: TreeSpec, label: bool) -> DecisionTree {
        DecisionTree {
            spec,
            node_feature: vec![1; spec.internal_nodes()],
            leaf_label: vec![label; spec.leaves()],
        }
    }

    pub fn spec(&self) -> TreeSpec {
        self.spec
    }

    pub fn node_feature(&self) -> &[usize] {
        &self.node_feature
    }

    pub fn leaf_label(&self) -> &[bool] {
        &self.leaf_label
    }

    /// Index of the leaf `input` reaches.
    pub fn leaf_of(&self, input: &Input) -> usize {
        assert_eq!(input.len(), self.spec.n_features, "input width does not match the tree");
        let mut u = 1usize;
        for _ in 0..self.spec.depth {
            let feature = self.node_feature[u - 1];
            u = if input.feature(feature) { 2 * u } else { 2 * u + 1 };
        }
        u - self.spec.leaves()
    }

    pub fn evaluate(&self, input: &Input) -> bool {
        self.leaf_label[self.leaf_of(input)]
    }

    pub fn truth_table(&self) -> TruthTable {
        assert!(self.spec.n_features <= MAX_TABLE_FEATURES);
        TruthTable {
            n_features: self.spec.n_features,
            outputs: self.spec.inputs().map(|x| self.evaluate(&x)).collect(),
        }
    }

    pub fn functionally_equal(&self, other: &DecisionTree) -> bool {
        assert_eq!(self.spec.n_features, other.spec.n_features, "trees over different inputs");
        self.spec.inputs().all(|x| self.evaluate(&x) == other.evaluate(&x))
    }
}

impl fmt::Display for DecisionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nodes: Vec<String> = self.node_feature.iter().map(|i| format!("x{i}")).collect();
        let leaves: Vec<&str> = self.leaf_label.iter().map(|&b| if b { "1" } else { "0" }).collect();
        write!(f, "nodes [{}] leaves [{}]", nodes.join(", "), leaves.join(", "))
    }
}

/// Outputs over all `2^n` inputs, `x1` most significant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruthTable {
    n_features: usize,
    outputs: Vec<bool>,
}

impl TruthTable {
    pub fn new(n_features: usize, outputs: Vec<bool>) -> Result<TruthTable, TreeError> {
        if outputs.len() != 1 << n_features {
            return Err(TreeError::Length {
                what: "truth table rows",
                expected: 1 << n_features,
                got: outputs.len(),
            });
        }
        Ok(TruthTable { n_features, outputs })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn outputs(&self) -> &[bool] {
        &self.outputs
    }

    pub fn get(&self, input: &Input) -> bool {
        self.outputs[input.index()]
    }

    /// Compact form: one character per row in table order.
    pub fn to_bitstring(&self) -> String {
        self.outputs.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// `<bitstring> <label>` per line, every input once.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, &y) in self.outputs.iter().enumerate() {
            out.push_str(&Input::from_index(self.n_features, i).to_bitstring());
            out.push(' ');
            out.push(if y { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    /// Reads the line format. Rows may come in any order; every input must
    /// appear exactly once. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<TruthTable, TreeError> {
        let mut n: Option<usize> = None;
        let mut rows: Vec<Option<bool>> = Vec::new();
        let err = |line: usize, msg: String| TreeError::Parse { line, msg };
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (bits, label) = match (parts.next(), parts.next(), parts.next()) {
                (Some(b), Some(l), None) => (b, l),
                _ => return Err(err(lineno, format!("expected `<bits> <label>`, got `{line}`"))),
            };
            let input: Input = bits.parse().map_err(|e| err(lineno, e))?;
            let width = *n.get_or_insert(input.len());
            if width == 0 || width > MAX_TABLE_FEATURES {
                return Err(err(lineno, format!("unsupported input width {width}")));
            }
            if input.len() != width {
                return Err(err(lineno, format!("expected {width} bits, got {}", input.len())));
            }
            let label = match label {
                "0" => false,
                "1" => true,
                other => return Err(err(lineno, format!("label `{other}` is not 0 or 1"))),
            };
            rows.resize(1 << width, None);
            let slot = &mut rows[input.index()];
            if slot.is_some() {
                return Err(err(lineno, format!("input {input} listed twice")));
            }
            *slot = Some(label);
        }
        let n = n.ok_or_else(|| err(0, "empty truth table".into()))?;
        let missing = rows.iter().filter(|r| r.is_none()).count();
        if missing > 0 {
            return Err(err(0, format!("{missing} inputs have no row")));
        }
        Ok(TruthTable {
            n_features: n,
            outputs: rows.into_iter().map(Option::unwrap).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, d: usize) -> TreeSpec {
        TreeSpec::new(n, d).unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(spec(3, 2).hypothesis_space_size(), BigUint::from(432u32));
        assert_eq!(
            spec(5, 4).hypothesis_space_size(),
            BigUint::from(2_000_000_000_000_000u64)
        );
        assert_eq!(spec(7, 0).hypothesis_space_size(), BigUint::from(2u32));
    }

    #[test]
    fn single_split() {
        let t = DecisionTree::new(spec(1, 1), vec![1], vec![true, false]).unwrap();
        assert!(t.evaluate(&"1".parse().unwrap()));
        assert!(!t.evaluate(&"0".parse().unwrap()));
    }

    #[test]
    fn constant_tree() {
        let s = spec(3, 2);
        let t = DecisionTree::new(s, vec![2, 3, 1], vec![true; 4]).unwrap();
        assert!(s.inputs().all(|x| t.evaluate(&x)));
    }

    #[test]
    fn motivating_tree_fits_observations() {
        let t = DecisionTree::new(spec(3, 2), vec![3, 1, 2], vec![true, false, true, false]).unwrap();
        let pairs = [
            ("000", false),
            ("111", true),
            ("001", false),
            ("011", false),
            ("100", false),
            ("101", true),
            ("010", true),
        ];
        for (x, y) in pairs {
            assert_eq!(t.evaluate(&x.parse().unwrap()), y, "input {x}");
        }
    }

    #[test]
    fn evaluate_follows_one_path() {
        let s = spec(4, 3);
        let t = DecisionTree::random(s, 3);
        for x in s.inputs() {
            let mut u = 1;
            let mut tested = 0;
            while u < s.leaves() {
                u = if x.feature(t.node_feature()[u - 1]) { 2 * u } else { 2 * u + 1 };
                tested += 1;
            }
            assert_eq!(tested, s.depth);
            assert_eq!(t.leaf_of(&x), u - s.leaves());
        }
    }

    #[test]
    fn random_is_deterministic() {
        let s = spec(5, 3);
        assert_eq!(DecisionTree::random(s, 11), DecisionTree::random(s, 11));
        assert_ne!(DecisionTree::random(s, 11), DecisionTree::random(s, 12));
    }

    #[test]
    fn random_frequencies() {
        let s = spec(3, 2);
        let mut root = [0usize; 3];
        let mut ones = 0usize;
        let samples = 10_000;
        for seed in 0..samples {
            let t = DecisionTree::random(s, seed as u64);
            root[t.node_feature()[0] - 1] += 1;
            ones += t.leaf_label().iter().filter(|&&b| b).count();
        }
        for c in root {
            let freq = c as f64 / samples as f64;
            assert!((freq - 1.0 / 3.0).abs() <= 0.02, "root frequency {freq}");
        }
        let freq = ones as f64 / (4 * samples) as f64;
        assert!((freq - 0.5).abs() <= 0.02, "label frequency {freq}");
    }

    #[test]
    fn full_enumeration_matches_closed_form() {
        let s = spec(3, 2);
        let all: std::collections::HashSet<DecisionTree> = s.trees().collect();
        assert_eq!(all.len(), 432);
        let s = spec(2, 3);
        assert_eq!(s.trees().count(), 32_768);
    }

    #[test]
    fn redundant_subtree_is_functionally_equal() {
        // both leaves under node 3 say 1, so node 3's feature is irrelevant
        let s = spec(3, 2);
        let a = DecisionTree::new(s, vec![1, 2, 3], vec![false, true, true, true]).unwrap();
        let b = DecisionTree::new(s, vec![1, 2, 2], vec![false, true, true, true]).unwrap();
        assert_ne!(a, b);
        assert!(a.functionally_equal(&b));
        assert_eq!(a.truth_table(), b.truth_table());
    }

    #[test]
    fn functional_equality_basics() {
        let s = spec(3, 2);
        let one = DecisionTree::constant(s, true);
        let zero = DecisionTree::constant(s, false);
        assert!(one.functionally_equal(&one));
        assert!(!one.functionally_equal(&zero));
    }

    #[test]
    fn functional_equality_is_an_equivalence() {
        let s = spec(2, 2);
        for seed in 0..200u64 {
            let a = DecisionTree::random(s, seed);
            let b = DecisionTree::random(s, seed * 7 + 1);
            let c = DecisionTree::random(s, seed * 13 + 5);
            assert!(a.functionally_equal(&a));
            assert_eq!(a.functionally_equal(&b), b.functionally_equal(&a));
            if a.functionally_equal(&b) && b.functionally_equal(&c) {
                assert!(a.functionally_equal(&c));
            }
        }
    }

    #[test]
    fn validation() {
        let s = spec(3, 2);
        assert!(matches!(
            DecisionTree::new(s, vec![1, 2], vec![true; 4]),
            Err(TreeError::Length { .. })
        ));
        assert!(matches!(
            DecisionTree::new(s, vec![1, 2, 4], vec![true; 4]),
            Err(TreeError::FeatureOutOfRange { feature: 4, n: 3 })
        ));
        assert_eq!(TreeSpec::new(0, 2), Err(TreeError::NoFeatures));
    }

    #[test]
    fn input_index_is_msb_first() {
        let x: Input = "100".parse().unwrap();
        assert_eq!(x.index(), 4);
        assert_eq!(Input::from_index(3, 1).to_bitstring(), "001");
    }

    #[test]
    fn truth_table_text_round_trip() {
        let t = DecisionTree::new(spec(3, 2), vec![3, 1, 2], vec![true, false, true, false]).unwrap();
        let table = t.truth_table();
        let text = table.to_text();
        assert!(text.starts_with("000 0\n001 0\n010 1\n"));
        assert_eq!(TruthTable::parse(&text).unwrap(), table);
    }

    #[test]
    fn truth_table_parse_errors() {
        assert!(TruthTable::parse("00 1\n01 0\n10 1\n").is_err());
        assert!(TruthTable::parse("0 1\n0 0\n").is_err());
        assert!(TruthTable::parse("0 2\n1 0\n").is_err());
        assert!(TruthTable::parse("0 1\n10 0\n").is_err());
        assert!(TruthTable::parse("# only a comment\n").is_err());
    }
}
