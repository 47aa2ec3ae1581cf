//! Intersectional subgroups: conjunctions of per-feature predicates.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, FeatureKind};
use crate::error::{Error, Result};

/// Default cap on the number of combinations one generation may produce.
pub const DEFAULT_MAX_COMBINATIONS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateMatch {
    /// Category of a categorical feature (or `?` for a missing numeric value).
    Equals(String),
    /// Bin index of a numeric feature.
    InBin(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: String,
    #[serde(flatten)]
    pub matches: PredicateMatch,
}

impl Predicate {
    pub fn equals(feature: impl Into<String>, category: impl Into<String>) -> Self {
        Self {
            feature: feature.into(),
            matches: PredicateMatch::Equals(category.into()),
        }
    }

    pub fn in_bin(feature: impl Into<String>, bin: usize) -> Self {
        Self {
            feature: feature.into(),
            matches: PredicateMatch::InBin(bin),
        }
    }

    /// Resolve to `(feature index, level index)` on `dataset`.
    pub fn resolve(&self, dataset: &Dataset) -> Result<(usize, u32)> {
        let at = dataset.feature_index(&self.feature)?;
        let spec = &dataset.features()[at];
        let level = match (&self.matches, spec.kind) {
            (PredicateMatch::Equals(value), _) => dataset.level_of(at, value)?,
            (PredicateMatch::InBin(bin), FeatureKind::Numeric) if *bin < spec.bin_count() => *bin as u32,
            (PredicateMatch::InBin(bin), _) => {
                return Err(Error::UnknownValue {
                    feature: self.feature.clone(),
                    value: format!("bin {bin}"),
                })
            }
        };
        Ok((at, level))
    }

    /// Display label of the matched value.
    pub fn value_label(&self, dataset: &Dataset) -> Result<String> {
        let (at, level) = self.resolve(dataset)?;
        Ok(dataset.level_labels(at)[level as usize].clone())
    }
}

/// Build the predicate selecting `level` of feature `at`.
pub(crate) fn predicate_for_level(dataset: &Dataset, at: usize, level: u32) -> Predicate {
    let spec = &dataset.features()[at];
    match spec.kind {
        FeatureKind::Numeric if (level as usize) < spec.bin_count() => {
            Predicate::in_bin(&spec.name, level as usize)
        }
        _ => Predicate::equals(&spec.name, &dataset.level_labels(at)[level as usize]),
    }
}

/// A population slice with its membership count materialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgroup {
    pub id: String,
    pub dataset_id: String,
    pub predicates: Vec<Predicate>,
    pub display_name: String,
    pub size: usize,
}

impl Subgroup {
    /// Build a subgroup from predicates. Empty membership is allowed here;
    /// only [`generate_subgroups`] drops empty combinations.
    pub fn new(dataset: &Dataset, predicates: Vec<Predicate>) -> Result<Self> {
        if predicates.is_empty() {
            return Err(Error::EmptyPredicates);
        }
        let mut resolved = Vec::with_capacity(predicates.len());
        let mut labels = Vec::with_capacity(predicates.len());
        for p in &predicates {
            let (at, level) = p.resolve(dataset)?;
            if resolved.iter().any(|(f, _)| *f == at) {
                return Err(Error::DuplicatePredicate(p.feature.clone()));
            }
            resolved.push((at, level));
            labels.push(dataset.level_labels(at)[level as usize].clone());
        }
        let size = count_matching(dataset, &resolved);
        Ok(Self::assemble(dataset, predicates, labels.join(", "), size))
    }

    fn assemble(dataset: &Dataset, predicates: Vec<Predicate>, display_name: String, size: usize) -> Self {
        Self {
            id: subgroup_id(dataset.id(), &predicates),
            dataset_id: dataset.id().to_string(),
            predicates,
            display_name,
            size,
        }
    }

    fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        if self.dataset_id != dataset.id() {
            return Err(Error::StaleSubgroup {
                subgroup: self.id.clone(),
                expected: self.dataset_id.clone(),
                found: dataset.id().to_string(),
            });
        }
        Ok(())
    }
}

/// Identifier derived from the dataset and the predicate set, independent of
/// predicate order.
fn subgroup_id(dataset_id: &str, predicates: &[Predicate]) -> String {
    let mut sorted: Vec<&Predicate> = predicates.iter().collect();
    sorted.sort();
    let mut hasher = Sha256::new();
    hasher.update(dataset_id.as_bytes());
    for p in sorted {
        hasher.update(serde_json::to_vec(p).expect("predicate serializes"));
        hasher.update([0u8]);
    }
    format!("sg-{}", &hex::encode(hasher.finalize())[..12])
}

fn count_matching(dataset: &Dataset, resolved: &[(usize, u32)]) -> usize {
    (0..dataset.row_count())
        .filter(|&row| {
            resolved
                .iter()
                .all(|&(at, level)| dataset.level_codes(at)[row] == level)
        })
        .count()
}

/// Rows satisfying every predicate of `subgroup`.
pub fn membership_mask(dataset: &Dataset, subgroup: &Subgroup) -> Result<Vec<bool>> {
    subgroup.check_dataset(dataset)?;
    let resolved = subgroup
        .predicates
        .iter()
        .map(|p| p.resolve(dataset))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..dataset.row_count())
        .map(|row| {
            resolved
                .iter()
                .all(|&(at, level)| dataset.level_codes(at)[row] == level)
        })
        .collect())
}

/// A feature chosen for generation, optionally restricted to some values
/// (category names or bin labels).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
}

impl Selection {
    pub fn all(feature: impl Into<String>) -> Self {
        Self {
            feature: feature.into(),
            values: None,
        }
    }

    pub fn only<I, S>(feature: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            feature: feature.into(),
            values: Some(values.into_iter().map(Into::into).collect()),
        }
    }

    /// `(feature index, levels in selection order)`.
    pub(crate) fn resolve(&self, dataset: &Dataset) -> Result<(usize, Vec<u32>)> {
        let at = dataset.feature_index(&self.feature)?;
        let levels = match &self.values {
            None => (0..dataset.level_labels(at).len() as u32).collect(),
            Some(values) => {
                let mut levels = Vec::with_capacity(values.len());
                for v in values {
                    let level = dataset.level_of(at, v)?;
                    if !levels.contains(&level) {
                        levels.push(level);
                    }
                }
                levels
            }
        };
        Ok((at, levels))
    }
}

/// Cartesian product of the selected values, one subgroup per non-empty
/// combination. Output order follows the selections: the first feature
/// varies slowest.
pub fn generate_subgroups(
    dataset: &Dataset,
    selections: &[Selection],
    max_combinations: usize,
) -> Result<Vec<Subgroup>> {
    if selections.is_empty() {
        return Err(Error::NoSelection);
    }
    let mut axes = Vec::with_capacity(selections.len());
    for s in selections {
        let (at, levels) = s.resolve(dataset)?;
        if axes.iter().any(|(f, _)| *f == at) {
            return Err(Error::DuplicatePredicate(s.feature.clone()));
        }
        axes.push((at, levels));
    }
    let combinations = axes
        .iter()
        .fold(1u128, |acc, (_, levels)| acc.saturating_mul(levels.len() as u128));
    if combinations > max_combinations as u128 {
        return Err(Error::ProductTooLarge {
            combinations,
            cap: max_combinations,
        });
    }

    // Position of each level within its axis, for mixed-radix indexing.
    let positions: Vec<BTreeMap<u32, usize>> = axes
        .iter()
        .map(|(_, levels)| levels.iter().enumerate().map(|(i, &l)| (l, i)).collect())
        .collect();
    let mut counts = vec![0usize; combinations as usize];
    'rows: for row in 0..dataset.row_count() {
        let mut index = 0usize;
        for ((at, levels), pos) in axes.iter().zip(&positions) {
            match pos.get(&dataset.level_codes(*at)[row]) {
                Some(&p) => index = index * levels.len() + p,
                None => continue 'rows,
            }
        }
        counts[index] += 1;
    }

    let mut out = Vec::new();
    for (index, &size) in counts.iter().enumerate() {
        if size == 0 {
            continue;
        }
        let mut rest = index;
        let mut picks = vec![0usize; axes.len()];
        for (slot, (_, levels)) in picks.iter_mut().zip(&axes).rev() {
            *slot = rest % levels.len();
            rest /= levels.len();
        }
        let mut predicates = Vec::with_capacity(axes.len());
        let mut labels = Vec::with_capacity(axes.len());
        for (&pick, (at, levels)) in picks.iter().zip(&axes) {
            let level = levels[pick];
            predicates.push(predicate_for_level(dataset, *at, level));
            labels.push(dataset.level_labels(*at)[level as usize].clone());
        }
        out.push(Subgroup::assemble(dataset, predicates, labels.join(", "), size));
    }
    Ok(out)
}

/// A named, saved list of subgroups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSet {
    pub id: String,
    pub name: String,
    pub subgroup_ids: Vec<String>,
    pub created_at: DateTime<Utc>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_dataset, BinStrategy, IngestConfig};

    fn six_rows() -> Dataset {
        let text = "sex,occ,y,yhat\nM,A,1,1\nM,B,0,0\nF,A,1,0\nM,A,0,1\nF,B,1,1\nF,A,0,0\n";
        load_dataset(text.as_bytes(), &IngestConfig::new("y", "yhat")).unwrap()
    }

    #[test]
    fn mask_for_single_predicate() {
        let ds = six_rows();
        let male = Subgroup::new(&ds, vec![Predicate::equals("sex", "M")]).unwrap();
        let mask = membership_mask(&ds, &male).unwrap();
        assert_eq!(mask, vec![true, true, false, true, false, false]);
        assert_eq!(mask.iter().filter(|m| **m).count(), male.size);
        assert_eq!(male.size, 3);
    }

    #[test]
    fn duplicate_feature_predicates_are_rejected() {
        let ds = six_rows();
        let err = Subgroup::new(
            &ds,
            vec![Predicate::equals("sex", "M"), Predicate::equals("sex", "F")],
        )
        .unwrap_err();
        assert_eq!(err, Error::DuplicatePredicate("sex".into()));
    }

    #[test]
    fn generation_is_ordered_and_named() {
        let ds = six_rows();
        let groups = generate_subgroups(&ds, &[Selection::all("sex"), Selection::all("occ")], 1000).unwrap();
        let names: Vec<&str> = groups.iter().map(|g| g.display_name.as_str()).collect();
        // sex levels: F(3) before M(3) lexicographically; occ: A(4), B(2).
        assert_eq!(names, vec!["F, A", "F, B", "M, A", "M, B"]);
        assert_eq!(groups.iter().map(|g| g.size).sum::<usize>(), 6);
    }

    #[test]
    fn empty_combinations_are_dropped() {
        let text = "sex,occ,y,yhat\nM,X,1,1\nM,Y,0,0\nF,Y,1,0\nM,X,0,1\n";
        let ds = load_dataset(text.as_bytes(), &IngestConfig::new("y", "yhat")).unwrap();
        let groups = generate_subgroups(&ds, &[Selection::all("sex"), Selection::all("occ")], 1000).unwrap();
        assert_eq!(groups.len(), 3);
        assert!(!groups.iter().any(|g| g.display_name == "F, X"));
        // Manual construction of the empty combination is still allowed.
        let empty = Subgroup::new(
            &ds,
            vec![Predicate::equals("sex", "F"), Predicate::equals("occ", "X")],
        )
        .unwrap();
        assert_eq!(empty.size, 0);
    }

    #[test]
    fn whitelists_and_errors() {
        let ds = six_rows();
        let only_a = generate_subgroups(&ds, &[Selection::only("occ", ["A"])], 1000).unwrap();
        assert_eq!(only_a.len(), 1);
        assert_eq!(only_a[0].size, 4);
        assert_eq!(
            generate_subgroups(&ds, &[Selection::only("occ", ["Z"])], 1000).unwrap_err(),
            Error::UnknownValue {
                feature: "occ".into(),
                value: "Z".into()
            }
        );
        assert_eq!(
            generate_subgroups(&ds, &[], 1000).unwrap_err(),
            Error::NoSelection
        );
        assert_eq!(
            generate_subgroups(&ds, &[Selection::all("nope")], 1000).unwrap_err(),
            Error::UnknownFeature("nope".into())
        );
        assert_eq!(
            generate_subgroups(&ds, &[Selection::all("sex"), Selection::all("occ")], 3).unwrap_err(),
            Error::ProductTooLarge {
                combinations: 4,
                cap: 3
            }
        );
    }

    #[test]
    fn bins_can_be_selected_by_label() {
        let text = "h,sex,y,yhat\n40,M,1,1\n40,F,1,1\n45,M,0,0\n50,F,1,0\n20,M,1,1\n";
        let config = IngestConfig::new("y", "yhat").with_numeric(["h"]).with_bins(
            "h",
            BinStrategy::Explicit {
                edges: vec![1.0, 40.0, 41.0, 45.0, 46.0, 50.0, 51.0, 99.0],
            },
        );
        let ds = load_dataset(text.as_bytes(), &config).unwrap();
        let groups = generate_subgroups(
            &ds,
            &[Selection::all("sex"), Selection::only("h", ["40", "45", "50"])],
            1000,
        )
        .unwrap();
        let names: Vec<&str> = groups.iter().map(|g| g.display_name.as_str()).collect();
        assert_eq!(names, vec!["M, 40", "M, 45", "F, 40", "F, 50"]);
        assert_eq!(groups[0].predicates[1], Predicate::in_bin("h", 1));
    }

    #[test]
    fn stale_subgroups_are_detected() {
        let ds = six_rows();
        let other = ds.rebin("sex", &BinStrategy::default()).map(|_| ()).unwrap_err();
        assert_eq!(other, Error::NotNumeric("sex".into()));

        let text = "sex,occ,y,yhat\nM,A,1,1\n";
        let small = load_dataset(text.as_bytes(), &IngestConfig::new("y", "yhat")).unwrap();
        let g = Subgroup::new(&ds, vec![Predicate::equals("sex", "M")]).unwrap();
        assert!(matches!(
            membership_mask(&small, &g),
            Err(Error::StaleSubgroup { .. })
        ));
    }

    #[test]
    fn id_ignores_predicate_order() {
        let ds = six_rows();
        let a = Subgroup::new(
            &ds,
            vec![Predicate::equals("sex", "M"), Predicate::equals("occ", "A")],
        )
        .unwrap();
        let b = Subgroup::new(
            &ds,
            vec![Predicate::equals("occ", "A"), Predicate::equals("sex", "M")],
        )
        .unwrap();
        assert_eq!(a.id, b.id);
        assert_ne!(a.display_name, b.display_name);
    }
}
