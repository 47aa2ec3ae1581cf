//! Row-scan reference implementations of the audit metrics.
//!
//! Everything here works on raw string cells and recounts rows for every
//! quantity. Nothing is shared with `faircompass-core`, so agreement between
//! the two is evidence rather than tautology.

use std::collections::BTreeSet;

/// A categorical table with 0/1 labels and predictions.
#[derive(Debug, Clone)]
pub struct Table {
    pub features: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub label: Vec<u8>,
    pub pred: Vec<u8>,
}

/// Conjunction of `(feature, value)` equalities.
pub type Conjunction = Vec<(String, String)>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Table {
    /// Render as CSV with label column `y` and prediction column `yhat`.
    pub fn to_csv(&self) -> String {
        let mut out = self.features.join(",");
        out.push_str(",y,yhat\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&row.join(","));
            out.push_str(&format!(",{},{}\n", self.label[i], self.pred[i]));
        }
        out
    }

    fn column(&self, feature: &str) -> usize {
        self.features
            .iter()
            .position(|f| f == feature)
            .unwrap_or_else(|| panic!("no feature {feature}"))
    }

    pub fn matches(&self, row: usize, conj: &Conjunction) -> bool {
        conj.iter().all(|(f, v)| &self.rows[row][self.column(f)] == v)
    }

    fn count_where(&self, conj: &Conjunction, keep: impl Fn(u8, u8) -> bool) -> usize {
        let mut n = 0;
        for row in 0..self.rows.len() {
            if self.matches(row, conj) && keep(self.label[row], self.pred[row]) {
                n += 1;
            }
        }
        n
    }

    pub fn counts(&self, conj: &Conjunction) -> Counts {
        let mut c = Counts {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        for row in 0..self.rows.len() {
            if !self.matches(row, conj) {
                continue;
            }
            match (self.label[row], self.pred[row]) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fn_ += 1,
                other => panic!("non-binary row {other:?}"),
            }
        }
        c
    }

    pub fn size(&self, conj: &Conjunction) -> usize {
        self.count_where(conj, |_, _| true)
    }

    /// Rate by name, from two fresh row counts. `None` on a zero denominator.
    pub fn rate(&self, conj: &Conjunction, name: &str) -> Option<f64> {
        let (num, den) = match name {
            "accuracy" => (self.count_where(conj, |y, p| y == p), self.size(conj)),
            "precision" => (
                self.count_where(conj, |y, p| y == 1 && p == 1),
                self.count_where(conj, |_, p| p == 1),
            ),
            "tpr" | "recall" => (
                self.count_where(conj, |y, p| y == 1 && p == 1),
                self.count_where(conj, |y, _| y == 1),
            ),
            "tnr" => (
                self.count_where(conj, |y, p| y == 0 && p == 0),
                self.count_where(conj, |y, _| y == 0),
            ),
            "fpr" => (
                self.count_where(conj, |y, p| y == 0 && p == 1),
                self.count_where(conj, |y, _| y == 0),
            ),
            "fnr" => (
                self.count_where(conj, |y, p| y == 1 && p == 0),
                self.count_where(conj, |y, _| y == 1),
            ),
            "positive_rate" => (self.count_where(conj, |_, p| p == 1), self.size(conj)),
            "negative_rate" => (self.count_where(conj, |_, p| p == 0), self.size(conj)),
            "base_rate" => (self.count_where(conj, |y, _| y == 1), self.size(conj)),
            other => panic!("unknown rate {other}"),
        };
        (den > 0).then(|| num as f64 / den as f64)
    }

    /// Distinct values of a feature, sorted.
    pub fn values(&self, feature: &str) -> Vec<String> {
        let at = self.column(feature);
        let set: BTreeSet<&String> = self.rows.iter().map(|r| &r[at]).collect();
        set.into_iter().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parity {
    pub rates: Vec<Option<f64>>,
    pub max_abs_difference: f64,
    pub min_ratio: Option<f64>,
    pub satisfied: bool,
}

/// Pairwise comparison of a rate across groups; `None` with fewer than two
/// defined rates.
pub fn parity(table: &Table, groups: &[Conjunction], rate: &str, threshold: f64) -> Option<Parity> {
    let rates: Vec<Option<f64>> = groups.iter().map(|g| table.rate(g, rate)).collect();
    let defined: Vec<f64> = rates.iter().flatten().copied().collect();
    if defined.len() < 2 {
        return None;
    }
    let mut max_abs_difference: f64 = 0.0;
    let mut min_ratio: Option<f64> = None;
    let mut any_positive = false;
    for (i, a) in defined.iter().enumerate() {
        for b in &defined[i + 1..] {
            max_abs_difference = max_abs_difference.max((a - b).abs());
            let (lo, hi) = if a < b { (*a, *b) } else { (*b, *a) };
            if hi > 0.0 {
                any_positive = true;
                let r = lo / hi;
                min_ratio = Some(min_ratio.map_or(r, |m: f64| m.min(r)));
            }
        }
    }
    Some(Parity {
        rates,
        max_abs_difference,
        min_ratio: if any_positive { min_ratio } else { None },
        satisfied: max_abs_difference <= threshold,
    })
}

/// Demographic parity with `favourable` (0 or 1) as the favourable class.
pub fn demographic_parity(
    table: &Table,
    groups: &[Conjunction],
    favourable: u8,
    threshold: f64,
) -> Option<Parity> {
    let rate = if favourable == 1 {
        "positive_rate"
    } else {
        "negative_rate"
    };
    parity(table, groups, rate, threshold)
}

/// Signed deviation of a group's rate from the whole table's.
pub fn deviation(table: &Table, group: &Conjunction, rate: &str) -> Option<f64> {
    Some(table.rate(group, rate)? - table.rate(&Vec::new(), rate)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStratum {
    /// Legitimate-attribute values, in attribute order.
    pub key: Vec<String>,
    pub size: usize,
    /// `(sensitive value, size, favourable rate)` for compared groups.
    pub groups: Vec<(String, usize, f64)>,
    pub dropped: Vec<String>,
    pub max_abs_difference: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStratified {
    pub strata: Vec<OracleStratum>,
    pub excluded: Vec<(Vec<String>, usize)>,
    pub satisfied: bool,
}

pub struct CspQuery<'a> {
    pub sensitive: &'a str,
    pub sensitive_values: Option<Vec<String>>,
    pub legitimate: Vec<(&'a str, Option<Vec<String>>)>,
    pub favourable: u8,
    pub threshold: f64,
    pub min_size: usize,
}

/// Conditional statistical parity by enumerating every stratum key seen in
/// the data. `None` when no stratum qualifies.
pub fn conditional_parity(table: &Table, q: &CspQuery<'_>) -> Option<OracleStratified> {
    let allowed =
        |list: &Option<Vec<String>>, value: &String| list.as_ref().map_or(true, |l| l.contains(value));
    let sens_col = table.features.iter().position(|f| f == q.sensitive).unwrap();
    let legit_cols: Vec<usize> = q
        .legitimate
        .iter()
        .map(|(f, _)| table.features.iter().position(|g| g == f).unwrap())
        .collect();

    let mut keys: BTreeSet<Vec<String>> = BTreeSet::new();
    for row in &table.rows {
        if !allowed(&q.sensitive_values, &row[sens_col]) {
            continue;
        }
        let key: Vec<String> = legit_cols.iter().map(|&c| row[c].clone()).collect();
        if key
            .iter()
            .zip(&q.legitimate)
            .all(|(v, (_, list))| allowed(list, v))
        {
            keys.insert(key);
        }
    }

    let rate = if q.favourable == 1 {
        "positive_rate"
    } else {
        "negative_rate"
    };
    let mut strata = Vec::new();
    let mut excluded = Vec::new();
    for key in keys {
        let base: Conjunction = q
            .legitimate
            .iter()
            .map(|(f, _)| f.to_string())
            .zip(key.iter().cloned())
            .collect();
        let mut size = 0;
        let mut groups = Vec::new();
        let mut dropped = Vec::new();
        for value in table.values(q.sensitive) {
            if !allowed(&q.sensitive_values, &value) {
                continue;
            }
            let mut conj = base.clone();
            conj.push((q.sensitive.to_string(), value.clone()));
            let n = table.size(&conj);
            if n == 0 {
                continue;
            }
            size += n;
            if n < q.min_size {
                dropped.push(value);
            } else {
                groups.push((value, n, table.rate(&conj, rate).unwrap()));
            }
        }
        if size < q.min_size || groups.len() < 2 {
            excluded.push((key, size));
            continue;
        }
        let mut diff: f64 = 0.0;
        for (i, a) in groups.iter().enumerate() {
            for b in &groups[i + 1..] {
                diff = diff.max((a.2 - b.2).abs());
            }
        }
        strata.push(OracleStratum {
            key,
            size,
            groups,
            dropped,
            max_abs_difference: diff,
            satisfied: diff <= q.threshold,
        });
    }
    if strata.is_empty() {
        return None;
    }
    let satisfied = strata.iter().all(|s| s.satisfied);
    Some(OracleStratified {
        strata,
        excluded,
        satisfied,
    })
}

/// splitmix64, enough to spread fixture seeds.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// A random table with 1..=`max_rows` rows, 1..=`max_features` features
/// named `f0`, `f1`, ... and 1 to 4 values per feature.
pub fn random_table(seed: u64, max_rows: usize, max_features: usize) -> Table {
    let mut rng = SplitMix(seed);
    let n = 1 + rng.below(max_rows as u64) as usize;
    let k = 1 + rng.below(max_features as u64) as usize;
    let arity: Vec<u64> = (0..k).map(|_| 1 + rng.below(4)).collect();
    // Skew label and prediction rates per table so undefined rates show up.
    let p_label = rng.below(101);
    let p_pred = rng.below(101);
    let mut rows = Vec::with_capacity(n);
    let mut label = Vec::with_capacity(n);
    let mut pred = Vec::with_capacity(n);
    for _ in 0..n {
        rows.push(
            arity
                .iter()
                .map(|&a| ((b'a' + rng.below(a) as u8) as char).to_string())
                .collect(),
        );
        label.push(u8::from(rng.below(100) < p_label));
        pred.push(u8::from(rng.below(100) < p_pred));
    }
    Table {
        features: (0..k).map(|i| format!("f{i}")).collect(),
        rows,
        label,
        pred,
    }
}

/// Nine cells over features `a` and `b`, 40 rows each, predicted almost
/// always correctly except cell (`planted_a`, `planted_b`), which is right
/// for 16 of its 40 rows.
pub fn planted_table(noise_seed: u64, planted_a: usize, planted_b: usize) -> Table {
    let mut rng = SplitMix(noise_seed);
    let mut table = Table {
        features: vec!["a".into(), "b".into()],
        rows: Vec::new(),
        label: Vec::new(),
        pred: Vec::new(),
    };
    for a in 0..3 {
        for b in 0..3 {
            for i in 0..40 {
                let y = u8::from(i % 2 == 0);
                let correct = if (a, b) == (planted_a, planted_b) {
                    i < 16
                } else {
                    rng.below(100) >= 5
                };
                table.rows.push(vec![format!("a{a}"), format!("b{b}")]);
                table.label.push(y);
                table.pred.push(if correct { y } else { 1 - y });
            }
        }
    }
    table
}

/// Largest absolute deviation of `rate` from the whole table over every
/// conjunction of one or two features.
pub fn best_deviation(table: &Table, rate: &str) -> f64 {
    let mut candidates: Vec<Conjunction> = Vec::new();
    for (i, f) in table.features.iter().enumerate() {
        for v in table.values(f) {
            candidates.push(vec![(f.clone(), v.clone())]);
            for g in &table.features[i + 1..] {
                for w in table.values(g) {
                    candidates.push(vec![(f.clone(), v.clone()), (g.clone(), w)]);
                }
            }
        }
    }
    candidates
        .iter()
        .filter_map(|c| deviation(table, c, rate))
        .map(f64::abs)
        .fold(0.0, f64::max)
}
