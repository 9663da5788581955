//! CNF encoding of the decision-tree hypothesis space.
//!
//! Structural variables: `sel(u, i)` is true when internal node `u` tests
//! feature `i` (exactly one per node), `leaf(v)` is the label of leaf `v`.
//! They form the projection set, so projected model counts are tree counts.
//!
//! Every observation `(x, y)` adds fresh reachability variables `R_u(x)` and
//! implication clauses with `x` substituted as constants: the root is
//! reached, a reached node forwards `x` to the child picked by its selected
//! feature, and a reached leaf must carry label `y`. Reachability variables
//! are never projected; off-path ones are free, which is harmless because
//! only the projection is counted.

use thiserror::Error;

use crate::cnf::{Formula, Lit, Var};
use crate::sat::Valuation;
use crate::tree::{DecisionTree, Input, TreeSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("input has {got} bits but the space has {expected} features")]
    InputWidth { expected: usize, got: usize },
    #[error("node {node} selects {selected} features in the model; expected exactly one")]
    MalformedModel { node: usize, selected: usize },
    #[error("model assigns no value to variable {0}")]
    MissingValue(Var),
}

/// Map from tree-space symbols to formula variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarLayout {
    spec: TreeSpec,
    sel: Vec<Vec<Var>>,
    leaf: Vec<Var>,
    reach: Vec<Vec<Var>>,
    observations: Vec<(Input, bool)>,
}

impl VarLayout {
    pub fn spec(&self) -> TreeSpec {
        self.spec
    }

    /// Selection variable of internal node `node` (1-based, level order) and
    /// feature `feature` (1-based).
    pub fn sel(&self, node: usize, feature: usize) -> Var {
        self.sel[node - 1][feature - 1]
    }

    /// Label variable of leaf `leaf` (0-based, left to right).
    pub fn leaf(&self, leaf: usize) -> Var {
        self.leaf[leaf]
    }

    /// Reachability variable of `node` (1-based, internal nodes and leaves)
    /// for the observation at `obs`.
    pub fn reach(&self, obs: usize, node: usize) -> Var {
        self.reach[obs][node - 1]
    }

    pub fn observations(&self) -> &[(Input, bool)] {
        &self.observations
    }

    /// Selection then leaf variables, ascending.
    pub fn structural_vars(&self) -> Vec<Var> {
        self.sel.iter().flatten().chain(self.leaf.iter()).copied().collect()
    }

    pub fn is_structural(&self, v: Var) -> bool {
        let first = self.sel.first().and_then(|r| r.first()).unwrap_or(&self.leaf[0]);
        let last = self.leaf[self.leaf.len() - 1];
        *first <= v && v <= last
    }
}

/// Base hypothesis space: one exactly-one constraint per internal node, leaf
/// labels unconstrained.
pub fn encode_base(spec: TreeSpec) -> (Formula, VarLayout) {
    let mut f = Formula::new();
    let sel: Vec<Vec<Var>> = (0..spec.internal_nodes())
        .map(|_| f.new_vars(spec.n_features))
        .collect();
    let leaf = f.new_vars(spec.leaves());
    for row in &sel {
        f.add_clause(row.iter().map(|v| v.positive()));
        for (a, &si) in row.iter().enumerate() {
            for &sj in &row[a + 1..] {
                f.add_clause([si.negative(), sj.negative()]);
            }
        }
    }
    let layout = VarLayout {
        spec,
        sel,
        leaf,
        reach: Vec::new(),
        observations: Vec::new(),
    };
    f.set_projection(layout.structural_vars());
    (f, layout)
}

/// Restricts the space to trees mapping `x` to `y`.
pub fn add_observation(f: &mut Formula, layout: &mut VarLayout, x: &Input, y: bool) -> Result<(), EncodeError> {
    let spec = layout.spec;
    if x.len() != spec.n_features {
        return Err(EncodeError::InputWidth {
            expected: spec.n_features,
            got: x.len(),
        });
    }
    let reach = f.new_vars(spec.nodes());
    let r = |u: usize| reach[u - 1];
    f.add_clause([r(1).positive()]);
    for u in 1..=spec.internal_nodes() {
        for i in 1..=spec.n_features {
            let child = if x.feature(i) { 2 * u } else { 2 * u + 1 };
            f.add_clause([
                layout.sel(u, i).negative(),
                r(u).negative(),
                r(child).positive(),
            ]);
        }
    }
    for v in 0..spec.leaves() {
        let node = spec.leaves() + v;
        f.add_clause([r(node).negative(), layout.leaf(v).lit(y)]);
    }
    layout.reach.push(reach);
    layout.observations.push((x.clone(), y));
    Ok(())
}

/// Reads the tree out of a model (full or projected).
pub fn decode_model<M: Valuation + ?Sized>(model: &M, layout: &VarLayout) -> Result<DecisionTree, EncodeError> {
    let spec = layout.spec;
    let value = |v: Var| model.get(v).ok_or(EncodeError::MissingValue(v));
    let mut node_feature = Vec::with_capacity(spec.internal_nodes());
    for u in 1..=spec.internal_nodes() {
        let mut chosen = Vec::new();
        for i in 1..=spec.n_features {
            if value(layout.sel(u, i))? {
                chosen.push(i);
            }
        }
        if chosen.len() != 1 {
            return Err(EncodeError::MalformedModel {
                node: u,
                selected: chosen.len(),
            });
        }
        node_feature.push(chosen[0]);
    }
    let leaf_label = (0..spec.leaves())
        .map(|v| value(layout.leaf(v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DecisionTree::new(spec, node_feature, leaf_label).expect("decoded tree matches its layout"))
}

/// The projected assignment that denotes `tree`, sorted by variable.
pub fn encode_tree(tree: &DecisionTree, layout: &VarLayout) -> Vec<Lit> {
    let spec = layout.spec;
    assert_eq!(tree.spec(), spec, "tree and layout disagree on the space");
    let mut lits = Vec::with_capacity(spec.internal_nodes() * spec.n_features + spec.leaves());
    for u in 1..=spec.internal_nodes() {
        for i in 1..=spec.n_features {
            lits.push(layout.sel(u, i).lit(tree.node_feature()[u - 1] == i));
        }
    }
    for v in 0..spec.leaves() {
        lits.push(layout.leaf(v).lit(tree.leaf_label()[v]));
    }
    lits.sort_unstable();
    lits
}

/// Two copies of a version space evaluated on one shared symbolic input,
/// constrained to disagree. Unsatisfiable exactly when every tree left in
/// the space computes the same function.
#[derive(Clone, Debug)]
pub struct Miter {
    pub formula: Formula,
    /// Shared input variables, `x1` first.
    pub inputs: Vec<Var>,
    /// Output variable of each copy.
    pub outputs: [Var; 2],
    offsets: [u32; 2],
    layout: VarLayout,
}

impl Miter {
    /// Splits a satisfying assignment into the distinguishing input and the
    /// two disagreeing trees.
    pub fn decode_witness<M: Valuation + ?Sized>(
        &self,
        model: &M,
    ) -> Result<(Input, DecisionTree, DecisionTree), EncodeError> {
        let bits = self
            .inputs
            .iter()
            .map(|&v| model.get(v).ok_or(EncodeError::MissingValue(v)))
            .collect::<Result<Vec<_>, _>>()?;
        let copy = |offset: u32| -> Result<DecisionTree, EncodeError> {
            let shifted = Shifted { inner: model, offset };
            decode_model(&shifted, &self.layout)
        };
        Ok((Input::new(bits), copy(self.offsets[0])?, copy(self.offsets[1])?))
    }
}

struct Shifted<'a, M: ?Sized> {
    inner: &'a M,
    offset: u32,
}

impl<M: Valuation + ?Sized> Valuation for Shifted<'_, M> {
    fn get(&self, v: Var) -> Option<bool> {
        self.inner.get(Var::new(v.index() + self.offset))
    }
}

/// Builds the miter of `f`. Both copies keep every structural and observation
/// clause of `f`; on top of that each copy gets reachability for the
/// symbolic input, defined in both directions so it is a function of the
/// structure and the input, and an output variable.
pub fn build_miter(f: &Formula, layout: &VarLayout) -> Miter {
    let spec = layout.spec;
    let mut g = Formula::new();
    let offsets = [g.append_renamed(f), g.append_renamed(f)];
    let inputs = g.new_vars(spec.n_features);
    let mut outputs = Vec::with_capacity(2);
    for &off in &offsets {
        let shift = |v: Var| Var::new(v.index() + off);
        let reach = g.new_vars(spec.nodes());
        let r = |u: usize| reach[u - 1];
        g.add_clause([r(1).positive()]);
        for u in 1..=spec.internal_nodes() {
            let (left, right) = (r(2 * u), r(2 * u + 1));
            for i in 1..=spec.n_features {
                let s = shift(layout.sel(u, i)).negative();
                let x = inputs[i - 1];
                g.add_clause([s, r(u).negative(), x.negative(), left.positive()]);
                g.add_clause([s, r(u).negative(), x.positive(), right.positive()]);
                g.add_clause([s, left.negative(), x.positive()]);
                g.add_clause([s, right.negative(), x.negative()]);
            }
            g.add_clause([left.negative(), r(u).positive()]);
            g.add_clause([right.negative(), r(u).positive()]);
            g.add_clause([left.negative(), right.negative()]);
        }
        // out <-> OR_v (R_v & L_v)
        let out = g.new_var();
        let mut any = vec![out.negative()];
        for v in 0..spec.leaves() {
            let reached = r(spec.leaves() + v);
            let label = shift(layout.leaf(v));
            let both = g.new_var();
            g.add_clause([both.negative(), reached.positive()]);
            g.add_clause([both.negative(), label.positive()]);
            g.add_clause([both.positive(), reached.negative(), label.negative()]);
            g.add_clause([both.negative(), out.positive()]);
            any.push(both.positive());
        }
        g.add_clause(any);
        outputs.push(out);
    }
    g.add_clause([outputs[0].positive(), outputs[1].positive()]);
    g.add_clause([outputs[0].negative(), outputs[1].negative()]);
    let structural: Vec<Var> = offsets
        .iter()
        .flat_map(|&off| layout.structural_vars().into_iter().map(move |v| Var::new(v.index() + off)))
        .collect();
    g.set_projection(structural);
    Miter {
        formula: g,
        inputs,
        outputs: [outputs[0], outputs[1]],
        offsets,
        layout: layout.clone(),
    }
}
