use dtlearn_core::cnf::Formula;
use dtlearn_core::encode::{add_observation, build_miter, encode_base, encode_tree, VarLayout};
use dtlearn_core::learn::check_functional_collapse;
use dtlearn_core::sat::{solve, SolveResult, SolverConfig};
use dtlearn_core::tree::{DecisionTree, Input, TreeSpec};
use proptest::prelude::*;

fn spec32() -> TreeSpec {
    TreeSpec::new(3, 2).unwrap()
}

#[test]
fn observation_clauses_agree_with_evaluation() {
    let spec = spec32();
    let cfg = SolverConfig::default();
    for tree in spec.trees() {
        for x in spec.inputs() {
            for y in [false, true] {
                let (mut f, mut layout) = encode_base(spec);
                add_observation(&mut f, &mut layout, &x, y).unwrap();
                let sat = solve(&f, &encode_tree(&tree, &layout), &cfg).unwrap().is_sat();
                assert_eq!(sat, tree.evaluate(&x) == y, "{tree} on {x} -> {y}");
            }
        }
    }
}

fn restrict(spec: TreeSpec, obs: &[(Input, bool)]) -> (Formula, VarLayout) {
    let (mut f, mut layout) = encode_base(spec);
    for (x, y) in obs {
        add_observation(&mut f, &mut layout, x, *y).unwrap();
    }
    (f, layout)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Observations come from a hidden tree, so the space is never empty.
    #[test]
    fn miter_decides_functional_collapse(seed in any::<u64>(), mask in 0u32..256) {
        let spec = spec32();
        let hidden = DecisionTree::random(spec, seed);
        let obs: Vec<(Input, bool)> = spec
            .inputs()
            .filter(|x| mask >> x.index() & 1 == 1)
            .map(|x| { let y = hidden.evaluate(&x); (x, y) })
            .collect();
        let survivors: Vec<DecisionTree> = spec
            .trees()
            .filter(|t| obs.iter().all(|(x, y)| t.evaluate(x) == *y))
            .collect();
        let one_function = survivors.iter().all(|t| t.functionally_equal(&survivors[0]));
        let (f, layout) = restrict(spec, &obs);
        let cfg = SolverConfig::default();
        prop_assert_eq!(check_functional_collapse(&f, &layout, &cfg).unwrap(), one_function);
        if !one_function {
            let miter = build_miter(&f, &layout);
            let SolveResult::Sat(m) = solve(&miter.formula, &[], &cfg).unwrap() else {
                panic!("miter unsat")
            };
            let (x, a, b) = miter.decode_witness(&m).unwrap();
            prop_assert_ne!(a.evaluate(&x), b.evaluate(&x));
            prop_assert!(survivors.contains(&a) && survivors.contains(&b));
        }
    }

    /// The hidden tree is never eliminated by its own answers.
    #[test]
    fn hidden_tree_survives(seed in any::<u64>(), n in 2usize..=4, d in 1usize..=3, mask in any::<u16>()) {
        let spec = TreeSpec::new(n, d).unwrap();
        let hidden = DecisionTree::random(spec, seed);
        let obs: Vec<(Input, bool)> = spec
            .inputs()
            .filter(|x| mask >> x.index() & 1 == 1)
            .map(|x| { let y = hidden.evaluate(&x); (x, y) })
            .collect();
        let (f, layout) = restrict(spec, &obs);
        let sat = solve(&f, &encode_tree(&hidden, &layout), &SolverConfig::default()).unwrap();
        prop_assert!(sat.is_sat());
    }
}
