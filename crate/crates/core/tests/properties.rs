mod common;

use common::{equation_value, random_dataset, random_tree, random_valid_tree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semreg::constant::minimize_constant;
use semreg::equation::propagate_equations;
use semreg::tree::{default_names, parse_expression};
use semreg::{evaluate_tree, fit, kfold_split, Dataset, EvalError, ExprTree, Hyperparameters, NodeEquation, Strategy as FitStrategy};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small integers keep most arithmetic exact, so zero denominators really
/// occur and are detected.
fn integer_dataset(rng: &mut ChaCha8Rng, vars: usize, n: usize) -> Dataset {
    let v = (0..vars).map(|_| (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect()).collect();
    let t = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
    Dataset::new(v, t).unwrap()
}

fn integer_tree(rng: &mut ChaCha8Rng, size: usize, vars: usize) -> ExprTree {
    let t = random_tree(rng, size, vars);
    let mut nodes = t.nodes().to_vec();
    for n in &mut nodes {
        if let semreg::Node::Constant(k) = n {
            *k = k.round();
        }
    }
    ExprTree::from_preorder(nodes).unwrap()
}

/// Replaces every non-root node by small constants and by each variable;
/// any replacement that divides by zero must be one the node's forbidden
/// set rejects. Returns how many such replacements were seen.
fn zero_denominators_caught(seed: u64) -> Result<usize, TestCaseError> {
    let mut r = rng(seed);
    let data = integer_dataset(&mut r, 2, 6);
    let e = loop {
        let size = 2 * r.gen_range(1..6) + 1;
        let t = integer_tree(&mut r, size, 2);
        if let Ok(e) = evaluate_tree(&t, &data) {
            break e;
        }
    };
    let eqs = propagate_equations(&e, data.targets());
    let mut hits = 0;
    for id in 1..e.len() {
        for k in -4..=4 {
            if let Err(EvalError::DivisionByZero { .. }) = e.replace(id, &ExprTree::constant(k as f64), &data) {
                hits += 1;
                prop_assert!(!eqs[id].forbidden.allows_constant(k as f64), "k = {} at node {} of {}", k, id, e.tree().to_text());
            }
        }
        for v in 0..2 {
            if let Err(EvalError::DivisionByZero { .. }) = e.replace(id, &ExprTree::variable(v), &data) {
                hits += 1;
                prop_assert!(!eqs[id].forbidden.allows(data.variable(v)));
            }
        }
    }
    Ok(hits)
}

#[test]
fn zero_denominator_check_is_exercised() {
    let hits: usize = (0..200).map(|s| zero_denominators_caught(s).unwrap()).sum();
    assert!(hits > 100, "{hits}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn text_round_trip(seed in any::<u64>(), half in 0usize..12, vars in 1usize..5) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, 2 * half + 1, vars);
        let names = default_names(vars);
        let back = parse_expression(&t.display(&names).to_string(), &names).unwrap();
        prop_assert!(back.identical(&t), "{}", t.display(&names));
    }

    #[test]
    fn replacement_matches_full_evaluation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, 3, 12);
        let e = random_valid_tree(&mut r, &data, 21);
        let id = r.gen_range(0..e.len());
        let size = 2 * r.gen_range(0..3) + 1;
        let sub = random_tree(&mut r, size, 3);
        let full = e.tree().replace_subtree(id, &sub).unwrap();
        match (e.replace(id, &sub, &data), evaluate_tree(&full, &data)) {
            (Ok(a), Ok(b)) => {
                prop_assert!(a.tree().identical(b.tree()));
                for n in 0..a.len() {
                    prop_assert_eq!(a.semantics(n), b.semantics(n));
                }
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "incremental {:?} vs full {:?}", a.err(), b.err()),
        }
    }

    #[test]
    fn forbidden_sets_catch_every_zero_denominator(seed in any::<u64>()) {
        zero_denominators_caught(seed)?;
    }

    #[test]
    fn folds_partition_patterns(n in 2usize..300, k in 2usize..20) {
        prop_assume!(k <= n);
        let s = kfold_split(n, k).unwrap();
        prop_assert_eq!(&s, &kfold_split(n, k).unwrap());
        let mut seen = vec![0; n];
        for f in 0..k {
            let test = s.test_indices(f);
            prop_assert!(!test.is_empty());
            for i in test {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn closed_forms_are_local_minima(seed in any::<u64>(), varying_a in any::<bool>(), varying_d in any::<bool>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..15);
        let pick = |r: &mut ChaCha8Rng, varying: bool, lo: f64, hi: f64| {
            let base = r.gen_range(lo..hi);
            (0..n).map(|_| if varying { r.gen_range(lo..hi) } else { base }).collect::<Vec<f64>>()
        };
        let a = pick(&mut r, varying_a, 0.5, 3.0);
        let d = pick(&mut r, varying_d, 0.5, 3.0);
        let b = pick(&mut r, true, -5.0, 5.0);
        let eq = NodeEquation { a, b, c: vec![0.0; n], d, forbidden: Default::default() };
        let f = minimize_constant(&eq).unwrap();
        prop_assert!(f.case_used.is_closed_form());
        let at = equation_value(&eq, f.k);
        prop_assert!((at - f.fitted_mse).abs() <= 1e-12 * at.max(1e-300));
        for step in [1e-6, 1e-3, 1.0] {
            let delta = step * f.k.abs().max(1.0);
            prop_assert!(equation_value(&eq, f.k + delta) >= at * (1.0 - 1e-12));
            prop_assert!(equation_value(&eq, f.k - delta) >= at * (1.0 - 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fits_are_deterministic_monotone_and_bounded(
        seed in any::<u64>(),
        strategy in 1u8..=4,
        max_nodes in prop_oneof![Just(None), (1usize..16).prop_map(Some)],
        exp in 2i32..8,
    ) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, 2, 15);
        let hp = Hyperparameters {
            strategy: FitStrategy::try_from(strategy).unwrap(),
            max_nodes,
            min_improvement: 10f64.powi(-exp),
            max_iterations: Some(60),
            ..Hyperparameters::default()
        };
        let a = fit(&data, &hp).unwrap();
        let b = fit(&data, &hp).unwrap();
        prop_assert_eq!(a.without_timing(), b.without_timing());
        for w in a.trace.windows(2) {
            prop_assert!(w[0].mse - w[1].mse > w[0].mse * hp.min_improvement, "{} -> {}", w[0].mse, w[1].mse);
        }
        let limit = max_nodes.unwrap_or(usize::MAX);
        prop_assert!(a.trace.iter().all(|row| row.node_count <= limit));
        let direct = evaluate_tree(&a.tree, &data).unwrap().mse(data.targets());
        prop_assert!((direct - a.train_mse).abs() <= 1e-9 * direct.max(1e-12));
    }
}
