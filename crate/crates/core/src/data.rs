//! Tabular datasets carrying ground-truth labels and model predictions.
//!
//! A [`Dataset`] is immutable once loaded. Every feature is exposed as a list
//! of *levels*: the categories of a categorical feature, or the bins of a
//! numeric one. Subgroup predicates and strata are expressed over levels, so a
//! numeric feature must be binned before it can take part in a predicate.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Category that every missing value is mapped to.
pub const MISSING_CATEGORY: &str = "?";

/// Bin count used for numeric features without an explicit strategy.
pub const DEFAULT_EQUAL_WIDTH_BINS: usize = 10;

/// A binary class value. `Positive` is class 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Class {
    Negative,
    Positive,
}

impl Class {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Class::Positive
        } else {
            Class::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Class::Positive
    }
}

impl TryFrom<u8> for Class {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Class::Negative),
            1 => Ok(Class::Positive),
            other => Err(format!("class must be 0 or 1, got {other}")),
        }
    }
}

impl From<Class> for u8 {
    fn from(c: Class) -> u8 {
        c as u8
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical,
    Numeric,
}

/// Metadata for one feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Distinct values ordered by descending frequency, then lexicographically.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Strictly increasing bin boundaries. Bins are left-closed and
    /// right-open except the last, which is closed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bin_edges: Vec<f64>,
}

impl FeatureSpec {
    pub fn bin_count(&self) -> usize {
        self.bin_edges.len().saturating_sub(1)
    }

    /// Index of the bin containing `value`, if it lies inside the edges.
    pub fn bin_of(&self, value: f64) -> Option<usize> {
        bin_index(&self.bin_edges, value)
    }

    /// Human-readable bin label. A unit-width bin on integer edges is
    /// labelled by its lower edge, so `[40, 41)` reads as `40`.
    pub fn bin_label(&self, bin: usize) -> Option<String> {
        let n = self.bin_count();
        if bin >= n {
            return None;
        }
        let (lo, hi) = (self.bin_edges[bin], self.bin_edges[bin + 1]);
        let last = bin + 1 == n;
        Some(if !last && lo.fract() == 0.0 && hi == lo + 1.0 {
            format!("{lo}")
        } else if last {
            format!("[{lo}, {hi}]")
        } else {
            format!("[{lo}, {hi})")
        })
    }
}

fn bin_index(edges: &[f64], value: f64) -> Option<usize> {
    let (first, last) = (*edges.first()?, *edges.last()?);
    if edges.len() < 2 || !(value >= first && value <= last) {
        return None;
    }
    if value == last {
        return Some(edges.len() - 2);
    }
    Some(edges.partition_point(|e| *e <= value) - 1)
}

/// How to cut a numeric feature into bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum BinStrategy {
    EqualWidth { bins: usize },
    Explicit { edges: Vec<f64> },
}

impl Default for BinStrategy {
    fn default() -> Self {
        BinStrategy::EqualWidth {
            bins: DEFAULT_EQUAL_WIDTH_BINS,
        }
    }
}

fn default_missing_token() -> String {
    MISSING_CATEGORY.to_string()
}

/// Column roles and parsing rules for [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub label_column: String,
    pub prediction_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_column: Option<String>,
    /// Columns parsed as numbers. Everything else is categorical.
    #[serde(default)]
    pub numeric_columns: Vec<String>,
    #[serde(default = "default_missing_token")]
    pub missing_token: String,
    /// Extra spellings accepted for label and prediction values, e.g.
    /// `"<=50K" -> 1`. The literals `0` and `1` are always accepted.
    #[serde(default)]
    pub class_aliases: BTreeMap<String, Class>,
    /// Binning per numeric column; unlisted columns use equal width.
    #[serde(default)]
    pub bins: BTreeMap<String, BinStrategy>,
}

impl IngestConfig {
    pub fn new(label_column: impl Into<String>, prediction_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            prediction_column: prediction_column.into(),
            score_column: None,
            numeric_columns: Vec::new(),
            missing_token: default_missing_token(),
            class_aliases: BTreeMap::new(),
            bins: BTreeMap::new(),
        }
    }

    pub fn with_numeric<I, S>(mut self, columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.numeric_columns.extend(columns.into_iter().map(Into::into));
        self
    }

    pub fn with_alias(mut self, value: impl Into<String>, class: Class) -> Self {
        self.class_aliases.insert(value.into(), class);
        self
    }

    pub fn with_bins(mut self, column: impl Into<String>, strategy: BinStrategy) -> Self {
        self.bins.insert(column.into(), strategy);
        self
    }

    pub fn with_score(mut self, column: impl Into<String>) -> Self {
        self.score_column = Some(column.into());
        self
    }

    fn parse_class(&self, row: usize, column: &str, raw: &str) -> Result<bool> {
        match raw {
            "0" => Ok(false),
            "1" => Ok(true),
            other => self
                .class_aliases
                .get(other)
                .map(|c| c.is_positive())
                .ok_or_else(|| Error::NonBinaryLabel {
                    row,
                    column: column.to_string(),
                    value: other.to_string(),
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Column {
    /// Level index per row.
    codes: Vec<u32>,
    /// Label of every level; numeric columns append the missing level only
    /// when a value is missing.
    levels: Vec<String>,
    /// Raw values for numeric columns, NaN when missing.
    values: Option<Vec<f64>>,
}

/// An immutable table of features, labels and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id: String,
    header: Vec<String>,
    features: Vec<FeatureSpec>,
    columns: Vec<Column>,
    label: Vec<bool>,
    prediction: Vec<bool>,
    score: Option<Vec<f64>>,
    label_column: String,
    prediction_column: String,
    score_column: Option<String>,
}

/// One bar of a feature distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub feature: String,
    pub bins: Vec<HistogramBin>,
    pub total: usize,
}

impl Histogram {
    pub fn fraction(&self, label: &str) -> Option<f64> {
        let bin = self.bins.iter().find(|b| b.label == label)?;
        (self.total > 0).then(|| bin.count as f64 / self.total as f64)
    }
}

/// Parse delimiter-separated text with a header row into a [`Dataset`].
pub fn load_dataset<R: Read>(mut source: R, config: &IngestConfig) -> Result<Dataset> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Malformed(e.to_string()))?;
    load_bytes(&bytes, config)
}

fn load_bytes(bytes: &[u8], config: &IngestConfig) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Malformed(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();

    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateColumn { column: name.clone() });
        }
    }
    if config.label_column == config.prediction_column
        || config.score_column.as_deref() == Some(&config.label_column)
        || config.score_column.as_deref() == Some(&config.prediction_column)
    {
        return Err(Error::DuplicateColumn {
            column: config.prediction_column.clone(),
        });
    }
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let label_at = position(&config.label_column)?;
    let prediction_at = position(&config.prediction_column)?;
    let score_at = config.score_column.as_deref().map(position).transpose()?;
    for name in &config.numeric_columns {
        position(name)?;
    }

    let feature_at: Vec<usize> = (0..header.len())
        .filter(|&i| i != label_at && i != prediction_at && Some(i) != score_at)
        .collect();
    for (name, _) in &config.bins {
        let i = position(name)?;
        if !feature_at.contains(&i) || !config.numeric_columns.contains(name) {
            return Err(Error::NotNumeric(name.clone()));
        }
    }

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); feature_at.len()];
    let mut label = Vec::new();
    let mut prediction = Vec::new();
    let mut score = score_at.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Malformed(e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        label.push(config.parse_class(row, &config.label_column, &record[label_at])?);
        prediction.push(config.parse_class(row, &config.prediction_column, &record[prediction_at])?);
        if let (Some(at), Some(scores)) = (score_at, score.as_mut()) {
            let column = &header[at];
            let value = parse_number(&record[at]).ok_or_else(|| Error::UnparseableNumeric {
                row,
                column: column.clone(),
                value: record[at].to_string(),
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ScoreOutOfRange {
                    row,
                    column: column.clone(),
                    value,
                });
            }
            scores.push(value);
        }
        for (slot, &at) in raw.iter_mut().zip(&feature_at) {
            slot.push(record[at].to_string());
        }
    }

    let mut features = Vec::with_capacity(feature_at.len());
    let mut columns = Vec::with_capacity(feature_at.len());
    for (values, &at) in raw.into_iter().zip(&feature_at) {
        let name = header[at].clone();
        let (spec, column) = if config.numeric_columns.contains(&name) {
            let parsed = values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if *v == config.missing_token {
                        Ok(f64::NAN)
                    } else {
                        parse_number(v).ok_or_else(|| Error::UnparseableNumeric {
                            row: i + 1,
                            column: name.clone(),
                            value: v.clone(),
                        })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            let strategy = config.bins.get(&name).cloned().unwrap_or_default();
            let edges = compute_edges(&name, &parsed, &strategy)?;
            numeric_column(name, parsed, edges)?
        } else {
            categorical_column(name, values, &config.missing_token)
        };
        features.push(spec);
        columns.push(column);
    }

    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.update(serde_json::to_vec(config).expect("config serializes"));
    let id = format!("ds-{}", &hex::encode(hasher.finalize())[..16]);

    Ok(Dataset {
        id,
        header,
        features,
        columns,
        label,
        prediction,
        score,
        label_column: config.label_column.clone(),
        prediction_column: config.prediction_column.clone(),
        score_column: config.score_column.clone(),
    })
}

fn parse_number(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn categorical_column(name: String, values: Vec<String>, missing_token: &str) -> (FeatureSpec, Column) {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for v in &values {
        let v = if v == missing_token {
            MISSING_CATEGORY
        } else {
            v.as_str()
        };
        *counts.entry(v).or_default() += 1;
    }
    let mut categories: Vec<(&str, usize)> = counts.into_iter().collect();
    categories.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let categories: Vec<String> = categories.into_iter().map(|(c, _)| c.to_string()).collect();
    let index: HashMap<&str, u32> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as u32))
        .collect();
    let codes = values
        .iter()
        .map(|v| {
            let v = if v == missing_token {
                MISSING_CATEGORY
            } else {
                v.as_str()
            };
            index[v]
        })
        .collect();
    let spec = FeatureSpec {
        name,
        kind: FeatureKind::Categorical,
        categories: categories.clone(),
        bin_edges: Vec::new(),
    };
    (
        spec,
        Column {
            codes,
            levels: categories,
            values: None,
        },
    )
}

fn numeric_column(name: String, values: Vec<f64>, edges: Vec<f64>) -> Result<(FeatureSpec, Column)> {
    let spec = FeatureSpec {
        name,
        kind: FeatureKind::Numeric,
        categories: Vec::new(),
        bin_edges: edges,
    };
    let missing = spec.bin_count() as u32;
    let mut any_missing = false;
    let mut codes = Vec::with_capacity(values.len());
    for &v in &values {
        if v.is_nan() {
            any_missing = true;
            codes.push(missing);
        } else {
            let bin = spec.bin_of(v).ok_or_else(|| Error::InvalidEdges {
                feature: spec.name.clone(),
                reason: format!("value {v} lies outside the edges"),
            })?;
            codes.push(bin as u32);
        }
    }
    let mut levels: Vec<String> = (0..spec.bin_count())
        .map(|b| spec.bin_label(b).expect("bin in range"))
        .collect();
    if any_missing {
        levels.push(MISSING_CATEGORY.to_string());
    }
    Ok((
        spec,
        Column {
            codes,
            levels,
            values: Some(values),
        },
    ))
}

/// Bin edges for `values` (NaN entries are ignored) under `strategy`.
fn compute_edges(feature: &str, values: &[f64], strategy: &BinStrategy) -> Result<Vec<f64>> {
    let invalid = |reason: String| Error::InvalidEdges {
        feature: feature.to_string(),
        reason,
    };
    let observed = values.iter().copied().filter(|v| !v.is_nan());
    let (lo, hi) = observed.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    match strategy {
        BinStrategy::EqualWidth { bins } => {
            if *bins == 0 {
                return Err(invalid("equal width needs at least one bin".into()));
            }
            if lo > hi {
                return Ok(Vec::new());
            }
            // A constant column gets one unit of width.
            let top = if hi > lo { hi } else { lo + 1.0 };
            let k = *bins as f64;
            let mut edges: Vec<f64> = (0..=*bins).map(|i| lo + (top - lo) * i as f64 / k).collect();
            edges[*bins] = top;
            if edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!(
                    "range [{lo}, {top}] is too narrow for {bins} bins"
                )));
            }
            Ok(edges)
        }
        BinStrategy::Explicit { edges } => {
            if edges.len() < 2 {
                return Err(invalid("need at least two edges".into()));
            }
            if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("edges must be finite and strictly increasing".into()));
            }
            let (first, last) = (edges[0], edges[edges.len() - 1]);
            if lo < first || hi > last {
                let outside = if lo < first { lo } else { hi };
                return Err(invalid(format!("value {outside} lies outside [{first}, {last}]")));
            }
            Ok(edges.clone())
        }
    }
}

impl Dataset {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn row_count(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn feature(&self, name: &str) -> Result<&FeatureSpec> {
        Ok(&self.features[self.feature_index(name)?])
    }

    pub fn label(&self) -> &[bool] {
        &self.label
    }

    pub fn prediction(&self) -> &[bool] {
        &self.prediction
    }

    pub fn score(&self) -> Option<&[f64]> {
        self.score.as_deref()
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn prediction_column(&self) -> &str {
        &self.prediction_column
    }

    /// Level labels of a feature: categories, or bin labels plus `?` when
    /// some values are missing.
    pub fn level_labels(&self, feature: usize) -> &[String] {
        &self.columns[feature].levels
    }

    /// Level index of every row for a feature.
    pub fn level_codes(&self, feature: usize) -> &[u32] {
        &self.columns[feature].codes
    }

    /// Raw values of a numeric feature (NaN where missing).
    pub fn numeric_values(&self, feature: usize) -> Option<&[f64]> {
        self.columns[feature].values.as_deref()
    }

    /// Resolve a level label (category or bin label) to its index.
    pub fn level_of(&self, feature: usize, label: &str) -> Result<u32> {
        self.columns[feature]
            .levels
            .iter()
            .position(|l| l == label)
            .map(|p| p as u32)
            .ok_or_else(|| Error::UnknownValue {
                feature: self.features[feature].name.clone(),
                value: label.to_string(),
            })
    }

    /// A copy of this dataset with one numeric feature re-binned.
    pub fn rebin(&self, feature: &str, strategy: &BinStrategy) -> Result<Dataset> {
        let spec = bin_numeric(self, feature, strategy)?;
        let at = self.feature_index(feature)?;
        let values = self.columns[at].values.clone().expect("numeric column");
        let (spec, column) = numeric_column(spec.name, values, spec.bin_edges)?;

        let mut hasher = Sha256::new();
        hasher.update(self.id.as_bytes());
        hasher.update(feature.as_bytes());
        for e in &spec.bin_edges {
            hasher.update(e.to_le_bytes());
        }
        let mut out = self.clone();
        out.id = format!("ds-{}", &hex::encode(hasher.finalize())[..16]);
        out.features[at] = spec;
        out.columns[at] = column;
        Ok(out)
    }

    /// Write the dataset back out as comma-separated text with the original
    /// column order. Labels and predictions are written as `0`/`1`.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.header).expect("in-memory write");
        for row in 0..self.row_count() {
            let record: Vec<String> = self
                .header
                .iter()
                .map(|name| {
                    if *name == self.label_column {
                        Class::from_bool(self.label[row]).to_string()
                    } else if *name == self.prediction_column {
                        Class::from_bool(self.prediction[row]).to_string()
                    } else if Some(name) == self.score_column.as_ref() {
                        format!("{}", self.score.as_ref().expect("score column")[row])
                    } else {
                        let at = self.feature_index(name).expect("feature column");
                        let column = &self.columns[at];
                        match &column.values {
                            Some(values) if values[row].is_nan() => MISSING_CATEGORY.to_string(),
                            Some(values) => format!("{}", values[row]),
                            None => column.levels[column.codes[row] as usize].clone(),
                        }
                    }
                })
                .collect();
            writer.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8 fields")
    }
}

/// Count rows per category or per bin of one feature.
pub fn feature_distribution(dataset: &Dataset, feature: &str) -> Result<Histogram> {
    let at = dataset.feature_index(feature)?;
    let levels = dataset.level_labels(at);
    let mut counts = vec![0usize; levels.len()];
    for &c in dataset.level_codes(at) {
        counts[c as usize] += 1;
    }
    Ok(Histogram {
        feature: feature.to_string(),
        bins: levels
            .iter()
            .zip(counts)
            .map(|(label, count)| HistogramBin {
                label: label.clone(),
                count,
            })
            .collect(),
        total: dataset.row_count(),
    })
}

/// Compute the [`FeatureSpec`] a numeric feature would have under `strategy`.
pub fn bin_numeric(dataset: &Dataset, feature: &str, strategy: &BinStrategy) -> Result<FeatureSpec> {
    let at = dataset.feature_index(feature)?;
    let values = dataset
        .numeric_values(at)
        .ok_or_else(|| Error::NotNumeric(feature.to_string()))?;
    let edges = compute_edges(feature, values, strategy)?;
    Ok(FeatureSpec {
        name: feature.to_string(),
        kind: FeatureKind::Numeric,
        categories: Vec::new(),
        bin_edges: edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, config: &IngestConfig) -> Result<Dataset> {
        load_dataset(text.as_bytes(), config)
    }

    fn basic() -> IngestConfig {
        IngestConfig::new("y", "yhat")
    }

    #[test]
    fn sex_distribution_counts_missing_as_category() {
        let text = "sex,y,yhat\nM,1,1\nM,0,0\nM,1,0\nF,0,1\nF,1,1\n?,0,0\n";
        let ds = load(text, &basic()).unwrap();
        let h = feature_distribution(&ds, "sex").unwrap();
        let bins: Vec<(&str, usize)> = h.bins.iter().map(|b| (b.label.as_str(), b.count)).collect();
        assert_eq!(bins, vec![("M", 3), ("F", 2), ("?", 1)]);
        assert_eq!(h.total, 6);
    }

    #[test]
    fn non_binary_label_names_the_row() {
        let text = "a,y,yhat\nx,1,1\nx,0,0\nx,2,0\nx,1,1\n";
        assert_eq!(
            load(text, &basic()).unwrap_err(),
            Error::NonBinaryLabel {
                row: 3,
                column: "y".into(),
                value: "2".into()
            }
        );
    }

    #[test]
    fn class_aliases_map_label_strings() {
        let text = "a,income,yhat\nx,<=50K,1\nx,>50K,0\n";
        let config = IngestConfig::new("income", "yhat")
            .with_alias("<=50K", Class::Positive)
            .with_alias(">50K", Class::Negative);
        let ds = load(text, &config).unwrap();
        assert_eq!(ds.label(), &[true, false]);
        assert!(load(text, &IngestConfig::new("income", "yhat")).is_err());
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(
            load("a,y\nx,1\n", &basic()),
            Err(Error::MissingColumn { column }) if column == "yhat"
        ));
        assert!(matches!(load("", &basic()), Err(Error::MissingColumn { .. })));
        assert_eq!(
            load("a,y,yhat\nx,1,1\nx,1\n", &basic()).unwrap_err(),
            Error::RaggedRow {
                row: 2,
                expected: 3,
                found: 2
            }
        );
        let numeric = basic().with_numeric(["h"]);
        assert_eq!(
            load("h,y,yhat\n3,1,1\nabc,0,0\n", &numeric).unwrap_err(),
            Error::UnparseableNumeric {
                row: 2,
                column: "h".into(),
                value: "abc".into()
            }
        );
        assert!(matches!(
            load("a,a,y,yhat\n", &basic()),
            Err(Error::DuplicateColumn { .. })
        ));
    }

    #[test]
    fn empty_body_gives_empty_dataset() {
        let ds = load("sex,h,y,yhat\n", &basic().with_numeric(["h"])).unwrap();
        assert_eq!(ds.row_count(), 0);
        assert!(feature_distribution(&ds, "sex").unwrap().bins.is_empty());
        assert!(feature_distribution(&ds, "h").unwrap().bins.is_empty());
    }

    #[test]
    fn categories_sorted_by_frequency_then_name() {
        let ds = load("c,y,yhat\nb,1,1\na,1,1\nc,1,1\nc,0,0\nb,0,0\n", &basic()).unwrap();
        assert_eq!(ds.feature("c").unwrap().categories, vec!["b", "c", "a"]);
    }

    #[test]
    fn equal_width_edges() {
        let body: String = (0..=100).map(|v| format!("{v},1,1\n")).collect();
        let ds = load(&format!("h,y,yhat\n{body}"), &basic().with_numeric(["h"])).unwrap();
        let spec = bin_numeric(&ds, "h", &BinStrategy::EqualWidth { bins: 4 }).unwrap();
        assert_eq!(spec.bin_edges, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        let one = bin_numeric(&ds, "h", &BinStrategy::EqualWidth { bins: 1 }).unwrap();
        assert_eq!(one.bin_edges, vec![0.0, 100.0]);
        assert_eq!(
            bin_numeric(&ds, "h", &BinStrategy::EqualWidth { bins: 4 }).unwrap(),
            spec
        );
        assert!(matches!(
            bin_numeric(&ds, "h", &BinStrategy::EqualWidth { bins: 0 }),
            Err(Error::InvalidEdges { .. })
        ));
    }

    #[test]
    fn explicit_edges_assign_and_reject() {
        let hours = [30, 35, 40, 40, 41, 45, 50, 55, 59, 60];
        let body: String = hours.iter().map(|h| format!("{h},1,1\n")).collect();
        let ds = load(&format!("hours,y,yhat\n{body}"), &basic().with_numeric(["hours"])).unwrap();
        let strategy = BinStrategy::Explicit {
            edges: vec![30.0, 40.0, 50.0, 60.0],
        };
        let binned = ds.rebin("hours", &strategy).unwrap();
        let h = feature_distribution(&binned, "hours").unwrap();
        let counts: Vec<usize> = h.bins.iter().map(|b| b.count).collect();
        // [30,40) {30,35}; [40,50) {40,40,41,45}; [50,60] {50,55,59,60}
        assert_eq!(counts, vec![2, 4, 4]);
        assert_eq!(h.bins[2].label, "[50, 60]");

        let narrow = BinStrategy::Explicit {
            edges: vec![35.0, 40.0, 50.0, 60.0],
        };
        assert!(matches!(
            bin_numeric(&ds, "hours", &narrow),
            Err(Error::InvalidEdges { .. })
        ));
        let unsorted = BinStrategy::Explicit {
            edges: vec![30.0, 50.0, 40.0, 60.0],
        };
        assert!(matches!(
            bin_numeric(&ds, "hours", &unsorted),
            Err(Error::InvalidEdges { .. })
        ));
    }

    #[test]
    fn unit_bins_are_labelled_by_value() {
        let ds = load(
            "h,y,yhat\n39,1,1\n40,1,1\n40,0,1\n45,1,0\n",
            &basic().with_numeric(["h"]),
        )
        .unwrap()
        .rebin(
            "h",
            &BinStrategy::Explicit {
                edges: vec![1.0, 40.0, 41.0, 99.0],
            },
        )
        .unwrap();
        let h = feature_distribution(&ds, "h").unwrap();
        assert_eq!(h.bins[1].label, "40");
        assert_eq!(h.fraction("40"), Some(0.5));
    }

    #[test]
    fn bin_numeric_rejects_categorical() {
        let ds = load("c,y,yhat\na,1,1\n", &basic()).unwrap();
        assert_eq!(
            bin_numeric(&ds, "c", &BinStrategy::default()).unwrap_err(),
            Error::NotNumeric("c".into())
        );
        assert_eq!(
            feature_distribution(&ds, "nope").unwrap_err(),
            Error::UnknownFeature("nope".into())
        );
    }

    #[test]
    fn numeric_missing_values_get_their_own_bin() {
        let ds = load("h,y,yhat\n1,1,1\n?,1,1\n3,0,0\n", &basic().with_numeric(["h"])).unwrap();
        let h = feature_distribution(&ds, "h").unwrap();
        assert_eq!(h.bins.last().unwrap().label, "?");
        assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), 3);
    }

    #[test]
    fn csv_round_trip_preserves_columns() {
        let text = "age,sex,y,yhat,p\n31,F,1,0,0.25\n?,M,0,0,0.5\n47.5,\"A, B\",1,1,1\n";
        let config = basic().with_numeric(["age"]).with_score("p");
        let ds = load(text, &config).unwrap();
        let again = load(&ds.to_csv(), &config).unwrap();
        assert_eq!(again.label(), ds.label());
        assert_eq!(again.prediction(), ds.prediction());
        assert_eq!(again.score(), ds.score());
        assert_eq!(again.features(), ds.features());
        for f in 0..ds.features().len() {
            assert_eq!(again.level_codes(f), ds.level_codes(f));
        }
    }

    #[test]
    fn identical_bytes_give_identical_ids() {
        let text = "a,y,yhat\nx,1,1\n";
        assert_eq!(load(text, &basic()).unwrap(), load(text, &basic()).unwrap());
        let other = load("a,y,yhat\nx,1,0\n", &basic()).unwrap();
        assert_ne!(load(text, &basic()).unwrap().id(), other.id());
    }
}
