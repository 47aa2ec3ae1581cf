//! Metric, clustering and suggestion invariants under generated inputs,
//! run with a fixed proptest seed so the line printed is reproducible.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use faircompass_core::metrics::{confusion, overall_metrics, subgroup_metrics, ConfusionCounts};
use faircompass_core::suggest::{kmeans, suggest_subgroups, SuggestConfig};
use faircompass_core::{
    demographic_parity, generate_subgroups, load_dataset, membership_mask, parity_by_rate, Class, Dataset,
    IngestConfig, RateKind, Selection, Subgroup,
};
use faircompass_oracle::{best_deviation, planted_table, random_table};

use crate::Outcome;

const EPS: f64 = 1e-12;
/// Largest gap between the top suggestion and the exhaustive optimum.
pub const PLANTED_TOLERANCE: f64 = 0.05;

fn run<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<u32, String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))?;
    Ok(cases)
}

fn dataset(seed: u64) -> Result<Dataset, TestCaseError> {
    let table = random_table(seed, 120, 3);
    load_dataset(table.to_csv().as_bytes(), &IngestConfig::new("y", "yhat"))
        .map_err(|e| TestCaseError::fail(e.to_string()))
}

fn partition(ds: &Dataset) -> Vec<Subgroup> {
    let names: Vec<Selection> = ds.features().iter().map(|f| Selection::all(&f.name)).collect();
    generate_subgroups(ds, &names, 10_000).expect("random tables stay under the cap")
}

fn points() -> impl Strategy<Value = (Vec<Vec<f64>>, usize, u64)> {
    (1usize..5)
        .prop_flat_map(|dim| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 1..60))
        .prop_flat_map(|pts| {
            let n = pts.len();
            (Just(pts), 1..=n, any::<u64>())
        })
}

pub fn check() -> Outcome {
    let mut cases = 0;

    cases += run(
        "confusion decomposes over partitions",
        128,
        any::<u64>(),
        |seed| {
            let ds = dataset(seed)?;
            let mut sum = ConfusionCounts::default();
            for g in partition(&ds) {
                sum = sum + confusion(&ds, &membership_mask(&ds, &g).unwrap()).unwrap();
            }
            prop_assert_eq!(sum, confusion(&ds, &vec![true; ds.row_count()]).unwrap());
            prop_assert_eq!(sum.total(), ds.row_count());
            Ok(())
        },
    )?;

    cases += run(
        "rates and their complements sum to one",
        128,
        any::<u64>(),
        |seed| {
            let ds = dataset(seed)?;
            let mut vectors = vec![overall_metrics(&ds)];
            for g in partition(&ds) {
                vectors.push(subgroup_metrics(&ds, &g).unwrap());
            }
            for v in vectors {
                prop_assert_eq!(v.recall.is_some(), v.fnr.is_some());
                prop_assert_eq!(v.fpr.is_some(), v.tnr.is_some());
                if let (Some(tpr), Some(fnr)) = (v.recall, v.fnr) {
                    prop_assert!((tpr + fnr - 1.0).abs() < EPS);
                }
                if let (Some(fpr), Some(tnr)) = (v.fpr, v.tnr) {
                    prop_assert!((fpr + tnr - 1.0).abs() < EPS);
                }
                prop_assert!((v.positive_rate.unwrap() + v.negative_rate.unwrap() - 1.0).abs() < EPS);
            }
            Ok(())
        },
    )?;

    cases += run(
        "parity ignores group order",
        128,
        (any::<u64>(), 0usize..16, 0usize..RateKind::ALL.len()),
        |(seed, rotate, rate)| {
            let ds = dataset(seed)?;
            let mut groups = partition(&ds);
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
            Ok(())
        },
    )?;

    cases += run(
        "swapping the favourable class keeps the gap",
        128,
        any::<u64>(),
        |seed| {
            let ds = dataset(seed)?;
            let groups = partition(&ds);
            if groups.len() < 2 {
                return Ok(());
            }
            let pos = demographic_parity(&ds, &groups, Class::Positive, 0.1).unwrap();
            let neg = demographic_parity(&ds, &groups, Class::Negative, 0.1).unwrap();
            prop_assert!((pos.max_abs_difference - neg.max_abs_difference).abs() < EPS);
            for (a, b) in pos.per_group.iter().zip(&neg.per_group) {
                prop_assert!((a.rate.unwrap() + b.rate.unwrap() - 1.0).abs() < EPS);
            }
            Ok(())
        },
    )?;

    cases += run(
        "k-means inertia never increases",
        64,
        points(),
        |(pts, k, seed)| {
            let r = kmeans(&pts, k, seed, 50).unwrap();
            for w in r.inertia_history.windows(2) {
                prop_assert!(
                    w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()),
                    "{:?}",
                    r.inertia_history
                );
            }
            prop_assert!(r.assignments.iter().all(|&c| c < k));
            Ok(())
        },
    )?;

    cases += run("k-means is seed deterministic", 64, points(), |(pts, k, seed)| {
        prop_assert_eq!(
            kmeans(&pts, k, seed, 50).unwrap(),
            kmeans(&pts, k, seed, 50).unwrap()
        );
        Ok(())
    })?;

    cases += run(
        "planted bias is recovered",
        32,
        (any::<u64>(), 0usize..3, 0usize..3, any::<u64>()),
        |(noise, a, b, seed)| {
            let table = planted_table(noise, a, b);
            let ds = load_dataset(table.to_csv().as_bytes(), &IngestConfig::new("y", "yhat")).unwrap();
            let config = SuggestConfig {
                ranking_rate: RateKind::Accuracy,
                seed,
                ..SuggestConfig::default()
            };
            let out = suggest_subgroups(&ds, &config).unwrap();
            prop_assert!(!out.is_empty());
            let best = best_deviation(&table, "accuracy");
            prop_assert!(
                (out[0].notability - best).abs() <= PLANTED_TOLERANCE,
                "top {} vs optimum {}",
                out[0].notability,
                best
            );
            Ok(())
        },
    )?;

    Ok(format!("7 properties, {cases} cases"))
}
