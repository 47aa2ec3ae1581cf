//! Every metric function against the row-scan oracle on random tables.

use faircompass_core::metrics::{
    conditional_statistical_parity, confusion, metrics, overall_metrics, ConditionalParityConfig,
    StratifiedParity,
};
use faircompass_core::subgroup::PredicateMatch;
use faircompass_core::{
    demographic_parity, generate_subgroups, load_dataset, membership_mask, metric_deviation, parity_by_rate,
    Class, Error, IngestConfig, MetricVector, ParityAssessment, RateKind, Selection, Subgroup,
};
use faircompass_oracle::{self as oracle, Conjunction, CspQuery, OracleStratified, Parity, Table};

use crate::{ensure, err, Outcome};

pub const TABLES: u64 = 500;
pub const MAX_ROWS: usize = 200;
pub const MAX_FEATURES: usize = 4;
pub const TOLERANCE: f64 = 1e-12;
const THRESHOLD: f64 = 0.1;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOLERANCE
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => close(a, b),
        _ => false,
    }
}

/// `Ok(None)` for the listed error kinds, which the oracle reports as `None`.
fn allow<T>(result: Result<T, Error>, kinds: &[&str]) -> Result<Option<T>, String> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(e) if kinds.contains(&e.kind()) => Ok(None),
        Err(e) => Err(format!("unexpected error {e}")),
    }
}

fn conjunction(g: &Subgroup) -> Conjunction {
    g.predicates
        .iter()
        .map(|p| match &p.matches {
            PredicateMatch::Equals(v) => (p.feature.clone(), v.clone()),
            PredicateMatch::InBin(_) => unreachable!("random tables are categorical"),
        })
        .collect()
}

fn compare_vector(table: &Table, conj: &Conjunction, v: &MetricVector) -> Result<(), String> {
    ensure!(
        v.size == table.size(conj),
        "size {} vs {} for {conj:?}",
        v.size,
        table.size(conj)
    );
    let fields = [
        ("accuracy", v.accuracy),
        ("precision", v.precision),
        ("tpr", v.recall),
        ("tnr", v.tnr),
        ("fpr", v.fpr),
        ("fnr", v.fnr),
        ("positive_rate", v.positive_rate),
        ("negative_rate", v.negative_rate),
        ("base_rate", v.base_rate),
    ];
    for (name, ours) in fields {
        let theirs = table.rate(conj, name);
        ensure!(
            close_opt(ours, theirs),
            "{name} {ours:?} vs {theirs:?} for {conj:?}"
        );
    }
    Ok(())
}

fn compare_parity(
    what: &str,
    ours: Option<&ParityAssessment>,
    theirs: Option<&Parity>,
) -> Result<(), String> {
    let (ours, theirs) = match (ours, theirs) {
        (None, None) => return Ok(()),
        (Some(o), Some(t)) => (o, t),
        (o, t) => return Err(format!("{what}: defined {} vs {}", o.is_some(), t.is_some())),
    };
    let rates: Vec<Option<f64>> = ours.per_group.iter().map(|g| g.rate).collect();
    ensure!(rates.len() == theirs.rates.len(), "{what}: group count");
    for (a, b) in rates.iter().zip(&theirs.rates) {
        ensure!(close_opt(*a, *b), "{what}: rate {a:?} vs {b:?}");
    }
    ensure!(
        close(ours.max_abs_difference, theirs.max_abs_difference),
        "{what}: max difference {} vs {}",
        ours.max_abs_difference,
        theirs.max_abs_difference
    );
    ensure!(
        close_opt(ours.min_ratio, theirs.min_ratio),
        "{what}: min ratio {:?} vs {:?}",
        ours.min_ratio,
        theirs.min_ratio
    );
    ensure!(ours.satisfied == theirs.satisfied, "{what}: satisfied");
    Ok(())
}

fn first_value(display_name: &str) -> String {
    display_name.split(", ").next().unwrap_or_default().to_string()
}

fn compare_stratified(
    ours: Option<&StratifiedParity>,
    theirs: Option<&OracleStratified>,
) -> Result<(), String> {
    let (ours, theirs) = match (ours, theirs) {
        (None, None) => return Ok(()),
        (Some(o), Some(t)) => (o, t),
        (o, t) => return Err(format!("csp: defined {} vs {}", o.is_some(), t.is_some())),
    };
    let mut strata: Vec<(Vec<String>, &_)> = ours
        .strata
        .iter()
        .map(|s| {
            let key = s
                .predicates
                .iter()
                .map(|p| match &p.matches {
                    PredicateMatch::Equals(v) => v.clone(),
                    PredicateMatch::InBin(b) => b.to_string(),
                })
                .collect();
            (key, s)
        })
        .collect();
    strata.sort_by(|a, b| a.0.cmp(&b.0));
    ensure!(
        strata.len() == theirs.strata.len(),
        "csp: {} strata vs {}",
        strata.len(),
        theirs.strata.len()
    );
    for ((key, s), t) in strata.iter().zip(&theirs.strata) {
        ensure!(
            *key == t.key && s.size == t.size,
            "csp: stratum {key:?}/{} vs {:?}/{}",
            s.size,
            t.key,
            t.size
        );
        let mut groups: Vec<(String, usize, Option<f64>)> = s
            .assessment
            .per_group
            .iter()
            .map(|g| (first_value(&g.display_name), g.size, g.rate))
            .collect();
        groups.sort_by(|a, b| a.0.cmp(&b.0));
        ensure!(groups.len() == t.groups.len(), "csp {key:?}: group count");
        for (g, (value, size, rate)) in groups.iter().zip(&t.groups) {
            ensure!(
                g.0 == *value && g.1 == *size && close_opt(g.2, Some(*rate)),
                "csp {key:?}: group {g:?} vs {value}/{size}/{rate}"
            );
        }
        ensure!(
            s.dropped_groups.len() == t.dropped.len(),
            "csp {key:?}: dropped groups"
        );
        ensure!(
            close(s.assessment.max_abs_difference, t.max_abs_difference),
            "csp {key:?}: max difference"
        );
        ensure!(s.assessment.satisfied == t.satisfied, "csp {key:?}: satisfied");
    }
    let mut excluded: Vec<(String, usize)> = ours
        .excluded
        .iter()
        .map(|e| (e.display_name.clone(), e.size))
        .collect();
    let mut expected: Vec<(String, usize)> =
        theirs.excluded.iter().map(|(k, n)| (k.join(", "), *n)).collect();
    excluded.sort();
    expected.sort();
    ensure!(excluded == expected, "csp: excluded {excluded:?} vs {expected:?}");
    ensure!(ours.satisfied == theirs.satisfied, "csp: overall satisfied");
    Ok(())
}

/// Compare every function on one random table; returns the number of
/// comparisons made.
pub fn check_table(seed: u64) -> Result<usize, String> {
    let table = oracle::random_table(seed, MAX_ROWS, MAX_FEATURES);
    let ds =
        load_dataset(table.to_csv().as_bytes(), &IngestConfig::new("y", "yhat")).map_err(err("ingest"))?;
    let mut compared = 0;

    let overall = overall_metrics(&ds);
    compare_vector(&table, &Vec::new(), &overall)?;
    let selections: Vec<Selection> = table.features.iter().take(2).map(Selection::all).collect();
    let groups = generate_subgroups(&ds, &selections, 10_000).map_err(err("generate"))?;
    for g in &groups {
        let conj = conjunction(g);
        let counts =
            confusion(&ds, &membership_mask(&ds, g).map_err(err("mask"))?).map_err(err("confusion"))?;
        let o = table.counts(&conj);
        ensure!(
            (counts.tp, counts.fp, counts.tn, counts.fn_) == (o.tp, o.fp, o.tn, o.fn_),
            "confusion {counts:?} vs {o:?} for {conj:?}"
        );
        let v = metrics(&counts);
        compare_vector(&table, &conj, &v)?;
        for kind in RateKind::ALL {
            let ours = metric_deviation(&v, &overall, kind).ok();
            let theirs = oracle::deviation(&table, &conj, kind.as_str());
            ensure!(
                close_opt(ours, theirs),
                "deviation {kind} {ours:?} vs {theirs:?} for {conj:?}"
            );
        }
        compared += 2 + RateKind::ALL.len();
    }

    let conjs: Vec<Conjunction> = groups.iter().map(conjunction).collect();
    for fav in [0u8, 1] {
        let class = Class::try_from(fav).expect("binary");
        let ours = allow(
            demographic_parity(&ds, &groups, class, THRESHOLD),
            &["TooFewGroups"],
        )?;
        let theirs = oracle::demographic_parity(&table, &conjs, fav, THRESHOLD);
        compare_parity(
            &format!("demographic parity ({fav})"),
            ours.as_ref(),
            theirs.as_ref(),
        )?;
        compared += 1;
    }
    for kind in RateKind::ALL {
        let ours = allow(
            parity_by_rate(&ds, &groups, kind, THRESHOLD),
            &["TooFewGroups", "UndefinedRate"],
        )?;
        let theirs = oracle::parity(&table, &conjs, kind.as_str(), THRESHOLD);
        compare_parity(&format!("parity by {kind}"), ours.as_ref(), theirs.as_ref())?;
        compared += 1;
    }

    if table.features.len() >= 2 {
        let legitimate: Vec<&str> = table.features[1..].iter().take(2).map(String::as_str).collect();
        let sensitive_values: Option<Vec<String>> =
            (seed % 2 == 1).then(|| table.values("f0").into_iter().take(2).collect());
        let min_size = 1 + (seed % 12) as usize;
        for fav in [0u8, 1] {
            let config = ConditionalParityConfig {
                sensitive: match &sensitive_values {
                    Some(v) => Selection::only("f0", v.iter().cloned()),
                    None => Selection::all("f0"),
                },
                legitimate: legitimate.iter().map(|f| Selection::all(*f)).collect(),
                favourable: Class::try_from(fav).expect("binary"),
                threshold: THRESHOLD,
                min_stratum_size: min_size,
            };
            let ours = allow(
                conditional_statistical_parity(&ds, &config),
                &["NoQualifyingStrata"],
            )?;
            let theirs = oracle::conditional_parity(
                &table,
                &CspQuery {
                    sensitive: "f0",
                    sensitive_values: sensitive_values.clone(),
                    legitimate: legitimate.iter().map(|f| (*f, None)).collect(),
                    favourable: fav,
                    threshold: THRESHOLD,
                    min_size,
                },
            );
            compare_stratified(ours.as_ref(), theirs.as_ref())?;
            compared += 1;
        }
    }
    Ok(compared)
}

pub fn check() -> Outcome {
    let mut compared = 0;
    for seed in 0..TABLES {
        compared += check_table(seed).map_err(|e| format!("table seed {seed}: {e}"))?;
    }
    Ok(format!(
        "{TABLES} tables, {compared} comparisons within {TOLERANCE:e}"
    ))
}
