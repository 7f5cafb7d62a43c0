use proptest::prelude::*;

use swarmleak::data::{
    build_attack_set, generate_synthetic, make_swarm_split, partition_indices, PartitionMode, PartitionSpec,
    SplitFractions,
};
use swarmleak::nn::PredictionVector;
use swarmleak::rng::derive_seed;

fn labels(classes: usize, per_class: usize) -> Vec<usize> {
    (0..classes).flat_map(|c| std::iter::repeat_n(c, per_class)).collect()
}

fn spec(mode: PartitionMode, clients: usize, alpha: f64, seed: u64) -> PartitionSpec {
    match mode {
        PartitionMode::Iid => PartitionSpec::iid(clients, seed),
        PartitionMode::Dirichlet => PartitionSpec::dirichlet(clients, alpha, seed),
    }
}

#[test]
fn partitions_are_disjoint_exact_covers() {
    let y = labels(6, 25);
    for mode in [PartitionMode::Iid, PartitionMode::Dirichlet] {
        for seed in 0..100u64 {
            let clients = 2 + (seed % 4) as usize;
            let plan = partition_indices(&y, 6, &spec(mode, clients, 0.3, seed)).unwrap();
            assert_eq!(plan.assignments.len(), clients);
            assert!(plan.assignments.iter().all(|a| !a.is_empty()), "{mode:?} seed {seed}");
            let mut all: Vec<usize> = plan.assignments.concat();
            all.sort_unstable();
            assert_eq!(all, (0..y.len()).collect::<Vec<_>>(), "{mode:?} seed {seed}");
        }
    }
}

#[test]
fn huge_alpha_approximates_iid() {
    let classes = 10;
    let y = labels(classes, 200);
    let clients = 4;
    let mut good = 0;
    for seed in 0..100u64 {
        let plan = partition_indices(&y, classes, &spec(PartitionMode::Dirichlet, clients, 1e6, seed)).unwrap();
        let within = plan.assignments.iter().all(|rows| {
            let mut hist = vec![0usize; classes];
            rows.iter().for_each(|&i| hist[y[i]] += 1);
            hist.iter().all(|&h| (h as f64 / rows.len() as f64 - 0.1).abs() <= 0.05)
        });
        let proportions_flat = plan.proportions.iter().flatten().all(|&p| (p - 0.25).abs() <= 0.05);
        if within && proportions_flat {
            good += 1;
        }
    }
    assert!(good >= 95, "{good}/100 trials close to IID");
}

#[test]
fn small_alpha_gives_skewed_label_subsets() {
    let y = labels(100, 20);
    let plan = partition_indices(&y, 100, &spec(PartitionMode::Dirichlet, 4, 0.5, 42)).unwrap();
    let sizes: Vec<usize> = plan.assignments.iter().map(Vec::len).collect();
    assert!(sizes.windows(2).any(|w| w[0] != w[1]), "sizes {sizes:?}");
    for rows in &plan.assignments {
        let mut seen = [false; 100];
        rows.iter().for_each(|&i| seen[y[i]] = true);
        assert!(seen.iter().any(|s| !s), "a client holds every label");
    }
}

#[test]
fn swarm_split_parts_cover_their_union_and_repeat() {
    let data = generate_synthetic(4, 25, 3, 0.5, 1).unwrap();
    let fractions = SplitFractions { test_fraction: 0.2, attacker_fraction: 0.2, shadow_fraction: 0.5 };
    for mode in [PartitionMode::Iid, PartitionMode::Dirichlet] {
        let s = spec(mode, 2, 0.5, 3);
        let a = make_swarm_split(&data, &s, &fractions, 9).unwrap();
        let b = make_swarm_split(&data, &s, &fractions, 9).unwrap();
        assert_eq!(a.indices, b.indices);
        let ix = &a.indices;
        let mut parts: Vec<usize> = ix.client_train.concat();
        parts.extend(&ix.shared_test);
        parts.extend(&ix.shadow_train);
        parts.extend(&ix.shadow_test);
        let n = parts.len();
        parts.sort_unstable();
        parts.dedup();
        assert_eq!(parts.len(), n, "parts overlap");
        assert_eq!(parts, (0..data.len()).collect::<Vec<_>>());
        for (k, t) in ix.client_test.iter().enumerate() {
            assert!(t.iter().all(|i| ix.shared_test.contains(i)), "client {k} test is not in the shared test");
        }
    }
}

fn pv(top: f64) -> PredictionVector {
    PredictionVector::new(vec![1.0 - top, top]).unwrap()
}

proptest! {
    #[test]
    fn balanced_attack_sets_have_equal_classes(members in 1usize..60, nonmembers in 1usize..60, seed in any::<u64>()) {
        let m: Vec<_> = (0..members).map(|i| pv(0.5 + 0.4 * i as f64 / 60.0)).collect();
        let n: Vec<_> = (0..nonmembers).map(|i| pv(0.1 + 0.3 * i as f64 / 60.0)).collect();
        let set = build_attack_set(&m, &n, true, seed).unwrap();
        let counts = set.class_counts();
        prop_assert_eq!(counts[0], counts[1]);
        prop_assert_eq!(counts[0], members.min(nonmembers));
        let unbalanced = build_attack_set(&m, &n, false, seed).unwrap();
        prop_assert_eq!(unbalanced.len(), members + nonmembers);
    }

    #[test]
    fn partitions_depend_only_on_inputs(seed in any::<u64>(), alpha in 0.05f64..5.0) {
        let y = labels(5, 12);
        let s = spec(PartitionMode::Dirichlet, 3, alpha, derive_seed(seed, "p", 0));
        prop_assert_eq!(partition_indices(&y, 5, &s).unwrap(), partition_indices(&y, 5, &s).unwrap());
    }
}
