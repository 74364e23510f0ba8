mod common;

use common::{brute_force_split, importance_from_dump, PLANTED_N_PER_CLASS, PLANTED_SEPARATION};
use proptest::prelude::*;
use qhsvm::data::{generate_synthetic, Class, SyntheticSpec};
use qhsvm::feature_select::{fit_tree, gini, impurity_decrease, rank_features, NodeStats, TreeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng, n: usize, f: usize, grid: Option<u32>) -> (Vec<Vec<f64>>, Vec<Class>) {
    let x = (0..n)
        .map(|_| {
            (0..f)
                .map(|_| match grid {
                    Some(g) => rng.random_range(0..g) as f64,
                    None => rng.random_range(-1.0..1.0),
                })
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| if rng.random_bool(0.5) { Class::Stress } else { Class::Baseline }).collect();
    (x, y)
}

#[test]
fn unit_values() {
    use Class::{Baseline as A, Stress as B};
    assert_eq!(gini::<f64, _>(&[A, A, A, B]).unwrap(), 0.375);
    let parent = NodeStats { impurity: 0.5, num_samples: 4 };
    let pure = NodeStats { impurity: 0.0, num_samples: 2 };
    assert_eq!(impurity_decrease(parent, pure, pure).unwrap(), 0.5);
}

#[test]
fn root_split_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 30 {
        let n = rng.random_range(4..=50);
        let f = rng.random_range(1..=5);
        // Half the instances sit on a coarse grid to force tied candidates.
        let grid = (checked % 2 == 0).then_some(4);
        let (x, y) = random_instance(&mut rng, n, f, grid);
        let Some((feature, threshold, _)) = brute_force_split(&x, &y) else { continue };
        if y.iter().all(|&l| l == y[0]) {
            continue;
        }
        let tree = fit_tree(&x, &y, &TreeConfig::default()).unwrap();
        let split = tree.split.as_ref().expect("impure root splits");
        assert_eq!((split.feature, split.threshold), (feature, threshold), "instance {checked}");
        checked += 1;
    }
}

#[test]
fn planted_features_are_recovered() {
    let mut good = 0;
    for seed in 0..20 {
        let spec = SyntheticSpec::planted(60, 8, PLANTED_N_PER_CLASS, PLANTED_SEPARATION, seed);
        let table = generate_synthetic::<f64>(&spec).unwrap();
        let tree = fit_tree(&table.rows, &table.labels, &TreeConfig::default()).unwrap();
        let ranking = rank_features(&tree, 60).unwrap().with_selected(8).unwrap();
        let planted = spec.planted_indices();
        let hits = ranking.selected.iter().filter(|f| planted.contains(f)).count();
        if hits >= 7 {
            good += 1;
        }
    }
    assert!(good >= 18, "only {good} of 20 trials recovered 7 planted features");
}

proptest! {
    #[test]
    fn importances_match_dump_reconstruction(seed in any::<u64>(), n in 4usize..60, f in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_instance(&mut rng, n, f, None);
        let tree = fit_tree(&x, &y, &TreeConfig::default()).unwrap();
        let ranking = rank_features(&tree, f).unwrap();
        let oracle = importance_from_dump(&tree.dump(), f);
        for (a, b) in ranking.scores.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-9, "{:?} vs {:?}", ranking.scores, oracle);
        }
        let mut order: Vec<usize> = (0..f).collect();
        order.sort_by(|&a, &b| ranking.scores[b].partial_cmp(&ranking.scores[a]).unwrap().then(a.cmp(&b)));
        prop_assert_eq!(ranking.order, order);
    }

    #[test]
    fn fully_grown_tree_fits_distinct_rows(seed in any::<u64>(), n in 2usize..40, f in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_instance(&mut rng, n, f, None);
        let tree = fit_tree(&x, &y, &TreeConfig::default()).unwrap();
        for (row, label) in x.iter().zip(&y) {
            prop_assert_eq!(tree.predict(row), *label);
        }
    }

    #[test]
    fn monotone_transform_keeps_ranking(seed in any::<u64>(), n in 4usize..50, f in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_instance(&mut rng, n, f, None);
        let warped: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| (3.0 * v).exp() + 2.0).collect()).collect();
        let a = rank_features(&fit_tree(&x, &y, &TreeConfig::default()).unwrap(), f).unwrap();
        let b = rank_features(&fit_tree(&warped, &y, &TreeConfig::default()).unwrap(), f).unwrap();
        prop_assert_eq!(&a.order, &b.order);
        for (p, q) in a.scores.iter().zip(&b.scores) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_are_a_distribution(seed in any::<u64>(), n in 2usize..50, f in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_instance(&mut rng, n, f, Some(3));
        let r = rank_features(&fit_tree(&x, &y, &TreeConfig::default()).unwrap(), f).unwrap();
        prop_assert!(r.scores.iter().all(|&s| s >= 0.0));
        let total: f64 = r.scores.iter().sum();
        prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-12);
    }
}
