use faircompass_core::metrics::{confusion, overall_metrics, subgroup_metrics, ConfusionCounts};
use faircompass_core::{
    demographic_parity, generate_subgroups, load_dataset, membership_mask, parity_by_rate, Class, Dataset,
    IngestConfig, RateKind, Selection, Subgroup,
};
use faircompass_oracle::random_table;
use proptest::prelude::*;

fn dataset(seed: u64) -> Dataset {
    let table = random_table(seed, 120, 3);
    load_dataset(table.to_csv().as_bytes(), &IngestConfig::new("y", "yhat")).unwrap()
}

fn partition(ds: &Dataset) -> Vec<Subgroup> {
    let names: Vec<Selection> = ds.features().iter().map(|f| Selection::all(&f.name)).collect();
    generate_subgroups(ds, &names, 10_000).unwrap()
}

const EPS: f64 = 1e-12;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn confusion_decomposes_over_partitions(seed in any::<u64>()) {
        let ds = dataset(seed);
        let mut sum = ConfusionCounts::default();
        for g in partition(&ds) {
            sum = sum + confusion(&ds, &membership_mask(&ds, &g).unwrap()).unwrap();
        }
        prop_assert_eq!(sum, confusion(&ds, &vec![true; ds.row_count()]).unwrap());
        prop_assert_eq!(sum.total(), ds.row_count());
    }

    #[test]
    fn rate_complements(seed in any::<u64>()) {
        let ds = dataset(seed);
        let mut vectors = vec![overall_metrics(&ds)];
        for g in partition(&ds) {
            vectors.push(subgroup_metrics(&ds, &g).unwrap());
        }
        for v in vectors {
            if let (Some(tpr), Some(fnr)) = (v.recall, v.fnr) {
                prop_assert!((tpr + fnr - 1.0).abs() < EPS);
            }
            if let (Some(fpr), Some(tnr)) = (v.fpr, v.tnr) {
                prop_assert!((fpr + tnr - 1.0).abs() < EPS);
            }
            prop_assert_eq!(v.recall.is_some(), v.fnr.is_some());
            prop_assert_eq!(v.fpr.is_some(), v.tnr.is_some());
            let (p, n) = (v.positive_rate.unwrap(), v.negative_rate.unwrap());
            prop_assert!((p + n - 1.0).abs() < EPS);
        }
    }

    #[test]
    fn parity_ignores_group_order(seed in any::<u64>(), rotate in 0usize..16, rate in 0usize..7) {
        let ds = dataset(seed);
        let mut groups = partition(&ds);
        prop_assume!(groups.len() >= 2);
        let rate = RateKind::ALL[rate];
        let before = parity_by_rate(&ds, &groups, rate, 0.1);
        let shift = rotate % groups.len();
        groups.rotate_left(shift);
        groups.reverse();
        let after = parity_by_rate(&ds, &groups, rate, 0.1);
        match (before, after) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.max_abs_difference, b.max_abs_difference);
                prop_assert_eq!(a.min_ratio, b.min_ratio);
                prop_assert_eq!(a.satisfied, b.satisfied);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn favourable_class_swap_keeps_the_gap(seed in any::<u64>()) {
        let ds = dataset(seed);
        let groups = partition(&ds);
        prop_assume!(groups.len() >= 2);
        let pos = demographic_parity(&ds, &groups, Class::Positive, 0.1).unwrap();
        let neg = demographic_parity(&ds, &groups, Class::Negative, 0.1).unwrap();
        prop_assert!((pos.max_abs_difference - neg.max_abs_difference).abs() < EPS);
        for (a, b) in pos.per_group.iter().zip(&neg.per_group) {
            prop_assert!((a.rate.unwrap() + b.rate.unwrap() - 1.0).abs() < EPS);
        }
    }
}
