//! Confusion-matrix metrics per subgroup and parity checks across subgroups.
//!
//! Rates whose denominator is zero are `None` and stay that way: they are
//! listed in assessments but never enter a difference or a ratio.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Class, Dataset};
use crate::error::{Error, Result};
use crate::subgroup::{membership_mask, predicate_for_level, Selection, Subgroup};

/// Default maximum tolerated absolute rate gap.
pub const DEFAULT_PARITY_THRESHOLD: f64 = 0.1;
/// Default minimum row count for a stratum and for each group compared in it.
pub const DEFAULT_MIN_STRATUM_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn add_row(&mut self, label: bool, prediction: bool) {
        match (label, prediction) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Tally label/prediction agreement over the rows selected by `mask`.
pub fn confusion(dataset: &Dataset, mask: &[bool]) -> Result<ConfusionCounts> {
    if mask.len() != dataset.row_count() {
        return Err(Error::MaskLength {
            expected: dataset.row_count(),
            found: mask.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for ((&m, &y), &p) in mask.iter().zip(dataset.label()).zip(dataset.prediction()) {
        if m {
            counts.add_row(y, p);
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub size: usize,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    /// True positive rate.
    pub recall: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    /// Fraction predicted 1.
    pub positive_rate: Option<f64>,
    /// Fraction predicted 0.
    pub negative_rate: Option<f64>,
    /// Fraction labelled 1.
    pub base_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> MetricVector {
    let n = c.total();
    MetricVector {
        size: n,
        accuracy: ratio(c.tp + c.tn, n),
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        tnr: ratio(c.tn, c.tn + c.fp),
        fpr: ratio(c.fp, c.fp + c.tn),
        fnr: ratio(c.fn_, c.fn_ + c.tp),
        positive_rate: ratio(c.tp + c.fp, n),
        negative_rate: ratio(c.tn + c.fn_, n),
        base_rate: ratio(c.tp + c.fn_, n),
    }
}

/// Metrics of one subgroup on `dataset`.
pub fn subgroup_metrics(dataset: &Dataset, subgroup: &Subgroup) -> Result<MetricVector> {
    let mask = membership_mask(dataset, subgroup)?;
    Ok(metrics(&confusion(dataset, &mask)?))
}

/// Metrics over every row.
pub fn overall_metrics(dataset: &Dataset) -> MetricVector {
    let mut counts = ConfusionCounts::default();
    for (&y, &p) in dataset.label().iter().zip(dataset.prediction()) {
        counts.add_row(y, p);
    }
    metrics(&counts)
}

/// Fraction of rows predicted as the favourable class.
pub fn rate_for_class(v: &MetricVector, favourable: Class) -> Result<f64> {
    match favourable {
        Class::Positive => v.positive_rate,
        Class::Negative => v.negative_rate,
    }
    .ok_or(Error::UndefinedRate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    PositiveRate,
    NegativeRate,
    Tpr,
    Fpr,
    Fnr,
    Precision,
    Accuracy,
}

impl RateKind {
    pub const ALL: [RateKind; 7] = [
        RateKind::PositiveRate,
        RateKind::NegativeRate,
        RateKind::Tpr,
        RateKind::Fpr,
        RateKind::Fnr,
        RateKind::Precision,
        RateKind::Accuracy,
    ];

    pub fn of(self, v: &MetricVector) -> Option<f64> {
        match self {
            RateKind::PositiveRate => v.positive_rate,
            RateKind::NegativeRate => v.negative_rate,
            RateKind::Tpr => v.recall,
            RateKind::Fpr => v.fpr,
            RateKind::Fnr => v.fnr,
            RateKind::Precision => v.precision,
            RateKind::Accuracy => v.accuracy,
        }
    }

    pub fn for_class(favourable: Class) -> Self {
        match favourable {
            Class::Positive => RateKind::PositiveRate,
            Class::Negative => RateKind::NegativeRate,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RateKind::PositiveRate => "positive_rate",
            RateKind::NegativeRate => "negative_rate",
            RateKind::Tpr => "tpr",
            RateKind::Fpr => "fpr",
            RateKind::Fnr => "fnr",
            RateKind::Precision => "precision",
            RateKind::Accuracy => "accuracy",
        }
    }
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let kind = match s.as_str() {
            "recall" => RateKind::Tpr,
            other => *RateKind::ALL
                .iter()
                .find(|k| k.as_str() == other)
                .ok_or_else(|| format!("unknown rate kind `{other}`"))?,
        };
        Ok(kind)
    }
}

/// Signed gap between a subgroup's rate and the dataset-wide rate.
pub fn metric_deviation(subgroup: &MetricVector, overall: &MetricVector, rate: RateKind) -> Result<f64> {
    match (rate.of(subgroup), rate.of(overall)) {
        (Some(s), Some(o)) => Ok(s - o),
        _ => Err(Error::UndefinedRate),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub subgroup_id: String,
    pub display_name: String,
    pub size: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityAssessment {
    pub rate_kind: RateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub favourable_class: Option<Class>,
    pub per_group: Vec<GroupRate>,
    pub max_abs_difference: f64,
    pub min_ratio: Option<f64>,
    pub satisfied: bool,
    pub threshold: f64,
}

/// Summarize per-group rates. Fails unless two or more rates are defined.
fn assess(
    rate_kind: RateKind,
    favourable_class: Option<Class>,
    per_group: Vec<GroupRate>,
    threshold: f64,
) -> Result<ParityAssessment> {
    let defined: Vec<f64> = per_group.iter().filter_map(|g| g.rate).collect();
    if defined.len() < 2 {
        return Err(Error::TooFewGroups(defined.len()));
    }
    let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let max_abs_difference = max - min;
    Ok(ParityAssessment {
        rate_kind,
        favourable_class,
        per_group,
        max_abs_difference,
        min_ratio: (max > 0.0).then(|| min / max),
        satisfied: max_abs_difference <= threshold,
        threshold,
    })
}

fn group_rates(dataset: &Dataset, subgroups: &[Subgroup], rate: RateKind) -> Result<Vec<GroupRate>> {
    subgroups
        .iter()
        .map(|g| {
            let v = subgroup_metrics(dataset, g)?;
            Ok(GroupRate {
                subgroup_id: g.id.clone(),
                display_name: g.display_name.clone(),
                size: v.size,
                rate: rate.of(&v),
            })
        })
        .collect()
}

/// Equal share of favourable predictions across subgroups.
pub fn demographic_parity(
    dataset: &Dataset,
    subgroups: &[Subgroup],
    favourable: Class,
    threshold: f64,
) -> Result<ParityAssessment> {
    let rate = RateKind::for_class(favourable);
    assess(
        rate,
        Some(favourable),
        group_rates(dataset, subgroups, rate)?,
        threshold,
    )
}

/// Parity of an arbitrary confusion-matrix rate across subgroups.
pub fn parity_by_rate(
    dataset: &Dataset,
    subgroups: &[Subgroup],
    rate: RateKind,
    threshold: f64,
) -> Result<ParityAssessment> {
    if subgroups.len() < 2 {
        return Err(Error::TooFewGroups(subgroups.len()));
    }
    let per_group = group_rates(dataset, subgroups, rate)?;
    assess(rate, None, per_group, threshold).map_err(|e| match e {
        Error::TooFewGroups(_) => Error::UndefinedRate,
        other => other,
    })
}

/// Inputs of [`conditional_statistical_parity`]. Value lists restrict the
/// levels considered; `None` means every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalParityConfig {
    pub sensitive: Selection,
    pub legitimate: Vec<Selection>,
    pub favourable: Class,
    pub threshold: f64,
    pub min_stratum_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub predicates: Vec<crate::subgroup::Predicate>,
    pub display_name: String,
    pub size: usize,
    /// Sensitive groups left out because they have too few rows.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_groups: Vec<String>,
    pub assessment: ParityAssessment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedStratum {
    pub display_name: String,
    pub size: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedParity {
    pub sensitive_attribute: String,
    pub legitimate_attributes: Vec<String>,
    pub favourable_class: Class,
    pub threshold: f64,
    pub min_stratum_size: usize,
    pub strata: Vec<Stratum>,
    pub excluded: Vec<ExcludedStratum>,
    pub satisfied: bool,
}

/// Demographic parity across sensitive groups within every stratum of the
/// legitimate attributes.
///
/// A stratum qualifies when it has at least `min_stratum_size` rows and at
/// least two sensitive groups of that size; smaller groups are dropped from
/// the comparison and reported. Non-qualifying strata are listed in
/// `excluded` with the reason.
pub fn conditional_statistical_parity(
    dataset: &Dataset,
    config: &ConditionalParityConfig,
) -> Result<StratifiedParity> {
    let (sens_at, sens_levels) = config.sensitive.resolve(dataset)?;
    let mut legit = Vec::with_capacity(config.legitimate.len());
    for s in &config.legitimate {
        let (at, levels) = s.resolve(dataset)?;
        if at == sens_at {
            return Err(Error::OverlappingAttributes(s.feature.clone()));
        }
        if legit.iter().any(|(f, _)| *f == at) {
            return Err(Error::DuplicatePredicate(s.feature.clone()));
        }
        legit.push((at, levels));
    }

    let position = |levels: &[u32], code: u32| levels.iter().position(|&l| l == code);
    let rate = RateKind::for_class(config.favourable);

    // stratum key (positions within each legitimate value list) ->
    // sensitive position -> counts
    let mut strata: BTreeMap<Vec<usize>, BTreeMap<usize, ConfusionCounts>> = BTreeMap::new();
    'rows: for row in 0..dataset.row_count() {
        let Some(s) = position(&sens_levels, dataset.level_codes(sens_at)[row]) else {
            continue;
        };
        let mut key = Vec::with_capacity(legit.len());
        for (at, levels) in &legit {
            match position(levels, dataset.level_codes(*at)[row]) {
                Some(p) => key.push(p),
                None => continue 'rows,
            }
        }
        strata
            .entry(key)
            .or_default()
            .entry(s)
            .or_default()
            .add_row(dataset.label()[row], dataset.prediction()[row]);
    }

    let mut out_strata = Vec::new();
    let mut excluded = Vec::new();
    for (key, groups) in strata {
        let predicates: Vec<_> = key
            .iter()
            .zip(&legit)
            .map(|(&p, (at, levels))| predicate_for_level(dataset, *at, levels[p]))
            .collect();
        let display_name = key
            .iter()
            .zip(&legit)
            .map(|(&p, (at, levels))| dataset.level_labels(*at)[levels[p] as usize].clone())
            .collect::<Vec<_>>()
            .join(", ");
        let size: usize = groups.values().map(ConfusionCounts::total).sum();
        if size < config.min_stratum_size {
            excluded.push(ExcludedStratum {
                display_name,
                size,
                reason: format!("{size} rows, fewer than {}", config.min_stratum_size),
            });
            continue;
        }

        let mut per_group = Vec::new();
        let mut dropped_groups = Vec::new();
        for (s, counts) in &groups {
            let level = sens_levels[*s];
            let mut group_predicates = vec![predicate_for_level(dataset, sens_at, level)];
            group_predicates.extend(predicates.iter().cloned());
            let group = Subgroup::new(dataset, group_predicates)?;
            if counts.total() < config.min_stratum_size {
                dropped_groups.push(format!("{} ({} rows)", group.display_name, counts.total()));
                continue;
            }
            per_group.push(GroupRate {
                subgroup_id: group.id,
                display_name: group.display_name,
                size: counts.total(),
                rate: rate.of(&metrics(counts)),
            });
        }
        if per_group.len() < 2 {
            let reason = if groups.len() < 2 {
                "only one sensitive group present".to_string()
            } else {
                format!(
                    "fewer than two sensitive groups with {} rows (dropped: {})",
                    config.min_stratum_size,
                    dropped_groups.join("; ")
                )
            };
            excluded.push(ExcludedStratum {
                display_name,
                size,
                reason,
            });
            continue;
        }
        let assessment = assess(rate, Some(config.favourable), per_group, config.threshold)?;
        out_strata.push(Stratum {
            predicates,
            display_name,
            size,
            dropped_groups,
            assessment,
        });
    }

    if out_strata.is_empty() {
        return Err(Error::NoQualifyingStrata {
            min_stratum_size: config.min_stratum_size,
        });
    }
    Ok(StratifiedParity {
        sensitive_attribute: config.sensitive.feature.clone(),
        legitimate_attributes: config.legitimate.iter().map(|s| s.feature.clone()).collect(),
        favourable_class: config.favourable,
        threshold: config.threshold,
        min_stratum_size: config.min_stratum_size,
        satisfied: out_strata.iter().all(|s| s.assessment.satisfied),
        strata: out_strata,
        excluded,
    })
}
