use std::collections::HashSet;

use dtlearn_core::count::CounterConfig;
use dtlearn_core::encode::encode_tree;
use dtlearn_core::learn::{run, LearnStatus, LearnerConfig, Stagnation};
use dtlearn_core::sat::{solve, SolverConfig};
use dtlearn_core::tree::{DecisionTree, TreeSpec};
use proptest::prelude::*;

fn exact_config(seed: u64, stagnation: Stagnation) -> LearnerConfig {
    LearnerConfig {
        counter: CounterConfig {
            exact_cap: u64::MAX,
            exact_budget: None,
            ..CounterConfig::default()
        },
        seed,
        stagnation,
        ..LearnerConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn runs_are_sound_and_terminate(
        seed in any::<u64>(),
        n in 2usize..=4,
        d in 1usize..=2,
        no_progress in any::<bool>(),
    ) {
        let spec = TreeSpec::new(n, d).unwrap();
        let hidden = DecisionTree::random(spec, seed);
        let stagnation = if no_progress { Stagnation::NoProgress } else { Stagnation::Flat };
        let out = run(spec, hidden.clone(), &exact_config(seed, stagnation)).unwrap();

        prop_assert!(out.queries() <= spec.num_inputs());
        let xs: HashSet<_> = out.trace.iter().map(|r| r.x_star.clone()).collect();
        prop_assert_eq!(xs.len(), out.trace.len());
        for r in &out.trace {
            prop_assert_eq!(r.y_star, hidden.evaluate(&r.x_star));
            prop_assert!(r.est_after.exact);
            prop_assert!(r.est_after.cmp_value(&r.est_before).is_le());
        }
        // the hidden tree is still in the final version space
        let assumptions = encode_tree(&hidden, &out.layout);
        prop_assert!(solve(&out.formula, &assumptions, &SolverConfig::default()).unwrap().is_sat());

        prop_assert_ne!(out.status, LearnStatus::NoUniqueTree);
        let tree = out.tree.as_ref().unwrap();
        prop_assert!(tree.functionally_equal(&hidden));
        for (x, y) in out.layout.observations() {
            prop_assert_eq!(tree.evaluate(x), *y);
        }
        if out.stagnated() {
            prop_assert!(out.queries() < spec.num_inputs());
        }
    }
}
