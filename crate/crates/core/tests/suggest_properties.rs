use faircompass_core::suggest::{kmeans, suggest_subgroups, SuggestConfig};
use faircompass_core::{load_dataset, membership_mask, IngestConfig, RateKind};
use faircompass_oracle::{best_deviation, planted_table};
use proptest::prelude::*;

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..5).prop_flat_map(|dim| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 1..60))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kmeans_inertia_never_increases(pts in points(), k_pick in 0usize..100, seed in any::<u64>()) {
        let k = 1 + k_pick % pts.len();
        let r = kmeans(&pts, k, seed, 50).unwrap();
        for w in r.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()), "{:?}", r.inertia_history);
        }
        prop_assert_eq!(r.assignments.len(), pts.len());
        prop_assert!(r.assignments.iter().all(|&c| c < k));
    }

    #[test]
    fn kmeans_is_seed_deterministic(pts in points(), k_pick in 0usize..100, seed in any::<u64>()) {
        let k = 1 + k_pick % pts.len();
        prop_assert_eq!(kmeans(&pts, k, seed, 50).unwrap(), kmeans(&pts, k, seed, 50).unwrap());
    }

    #[test]
    fn planted_bias_is_recovered(noise in any::<u64>(), a in 0usize..3, b in 0usize..3, seed in any::<u64>()) {
        let table = planted_table(noise, a, b);
        let ds = load_dataset(table.to_csv().as_bytes(), &IngestConfig::new("y", "yhat")).unwrap();
        let config = SuggestConfig { ranking_rate: RateKind::Accuracy, seed, ..SuggestConfig::default() };
        let out = suggest_subgroups(&ds, &config).unwrap();
        prop_assert!(!out.is_empty());
        let best = best_deviation(&table, "accuracy");
        prop_assert!((out[0].notability - best).abs() <= 0.05, "top {} vs optimum {}", out[0].notability, best);
        for s in &out {
            prop_assert!(s.subgroup.size > 0);
            prop_assert!(s.dominance.iter().all(|&d| d >= config.dominance_threshold));
            prop_assert_eq!(s.dominance.len(), s.subgroup.predicates.len());
            let mask = membership_mask(&ds, &s.subgroup).unwrap();
            prop_assert_eq!(mask.iter().filter(|m| **m).count(), s.subgroup.size);
        }
        prop_assert_eq!(&out, &suggest_subgroups(&ds, &config).unwrap());
    }
}

#[test]
fn planted_cell_ranks_first() {
    let table = planted_table(7, 1, 2);
    let ds = load_dataset(table.to_csv().as_bytes(), &IngestConfig::new("y", "yhat")).unwrap();
    let out = suggest_subgroups(&ds, &SuggestConfig::default()).unwrap();
    assert_eq!(out[0].subgroup.display_name, "a1, b2");
}
