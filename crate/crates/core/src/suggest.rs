//! Clustering-based subgroup suggestions and similar-subgroup ranking.
//!
//! Rows are one-hot encoded (categorical) and min-max scaled (numeric),
//! clustered with seeded k-means, and each cluster is described by the
//! categorical values that dominate it. Descriptions become ordinary
//! subgroups ranked by how far their rate sits from the dataset-wide rate.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::metrics::{overall_metrics, subgroup_metrics, RateKind};
use crate::subgroup::{membership_mask, Predicate, Subgroup};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DOMINANCE: f64 = 0.8;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceVector {
    pub row_index: usize,
    pub values: Vec<f64>,
}

/// Encoded rows without materialising the one-hot columns: each
/// categorical feature is a block holding a single 1 at the row's level.
struct Encoding {
    /// Column offset, block width and level code per row.
    categorical: Vec<(usize, usize, Vec<u32>)>,
    /// Column offset and scaled value per row.
    numeric: Vec<(usize, Vec<f64>)>,
    width: usize,
    rows: usize,
}

impl Encoding {
    fn new(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut categorical = Vec::new();
        let mut numeric = Vec::new();
        let mut offset = 0;
        for (at, spec) in dataset.features().iter().enumerate() {
            match spec.kind {
                FeatureKind::Categorical => {
                    categorical.push((offset, spec.categories.len(), dataset.level_codes(at).to_vec()));
                    offset += spec.categories.len();
                }
                FeatureKind::Numeric => {
                    let values = dataset.numeric_values(at).expect("numeric column");
                    let (lo, hi) = values
                        .iter()
                        .filter(|v| !v.is_nan())
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                            (lo.min(v), hi.max(v))
                        });
                    let scaled = values
                        .iter()
                        .map(|&v| {
                            if v.is_nan() || hi <= lo {
                                0.0
                            } else {
                                (v - lo) / (hi - lo)
                            }
                        })
                        .collect();
                    numeric.push((offset, scaled));
                    offset += 1;
                }
            }
        }
        Ok(Self {
            categorical,
            numeric,
            width: offset,
            rows: dataset.row_count(),
        })
    }
}

/// Encode every row. Categorical features contribute one column per
/// category in [`FeatureSpec::categories`](crate::data::FeatureSpec) order;
/// numeric features contribute one min-max scaled column. A constant numeric
/// column and missing numeric values encode as 0.
pub fn encode_instances(dataset: &Dataset) -> Result<Vec<InstanceVector>> {
    let encoding = Encoding::new(dataset)?;
    Ok((0..encoding.rows)
        .map(|row_index| InstanceVector {
            row_index,
            values: encoding.row(row_index),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("at least one assignment step")
    }

    /// Member rows of every cluster, in row order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (row, &c) in self.assignments.iter().enumerate() {
            out[c].push(row);
        }
        out
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row access for Lloyd's algorithm. `prepare` caches whatever a centroid
/// needs for fast distances.
trait Points {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn row(&self, i: usize) -> Vec<f64>;
    fn prepare(&self, centroid: &[f64]) -> Vec<f64>;
    fn sq_dist(&self, i: usize, centroid: &[f64], prepared: &[f64]) -> f64;
    fn accumulate(&self, i: usize, sum: &mut [f64]);
}

impl Points for [Vec<f64>] {
    fn len(&self) -> usize {
        <[Vec<f64>]>::len(self)
    }

    fn dim(&self) -> usize {
        self.first().map_or(0, Vec::len)
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self[i].clone()
    }

    fn prepare(&self, _centroid: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn sq_dist(&self, i: usize, centroid: &[f64], _prepared: &[f64]) -> f64 {
        sq_dist(&self[i], centroid)
    }

    fn accumulate(&self, i: usize, sum: &mut [f64]) {
        for (s, x) in sum.iter_mut().zip(&self[i]) {
            *s += x;
        }
    }
}

impl Points for Encoding {
    fn len(&self) -> usize {
        self.rows
    }

    fn dim(&self) -> usize {
        self.width
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let mut values = vec![0.0; self.width];
        for (offset, _, codes) in &self.categorical {
            values[offset + codes[i] as usize] = 1.0;
        }
        for (offset, scaled) in &self.numeric {
            values[*offset] = scaled[i];
        }
        values
    }

    /// Squared norm of each categorical block.
    fn prepare(&self, centroid: &[f64]) -> Vec<f64> {
        self.categorical
            .iter()
            .map(|(offset, len, _)| centroid[*offset..offset + len].iter().map(|c| c * c).sum())
            .collect()
    }

    fn sq_dist(&self, i: usize, centroid: &[f64], prepared: &[f64]) -> f64 {
        let mut d = 0.0;
        for ((offset, _, codes), block) in self.categorical.iter().zip(prepared) {
            let c = centroid[offset + codes[i] as usize];
            d += block - 2.0 * c + 1.0;
        }
        for (offset, scaled) in &self.numeric {
            let diff = scaled[i] - centroid[*offset];
            d += diff * diff;
        }
        d.max(0.0)
    }

    fn accumulate(&self, i: usize, sum: &mut [f64]) {
        for (offset, _, codes) in &self.categorical {
            sum[offset + codes[i] as usize] += 1.0;
        }
        for (offset, scaled) in &self.numeric {
            sum[*offset] += scaled[i];
        }
    }
}

/// Lloyd's algorithm with k-means++ seeding driven by ChaCha8 seeded from
/// `seed`. Empty clusters keep their previous centroid, and a point only
/// changes cluster when another centroid is strictly closer, so the
/// inertia never increases between steps.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    lloyd(points, k, seed, max_iter)
}

fn lloyd<P: Points + ?Sized>(points: &P, k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if max_iter == 0 {
        return Err(Error::ZeroIterations);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);

    let nearest = |i: usize, centroids: &[Vec<f64>], prepared: &[Vec<f64>], current: Option<usize>| {
        let mut best = current.unwrap_or(0);
        let mut best_d = points.sq_dist(i, &centroids[best], &prepared[best]);
        for (c, (centroid, cache)) in centroids.iter().zip(prepared).enumerate() {
            let d = points.sq_dist(i, centroid, cache);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        (best, best_d)
    };

    let mut prepared: Vec<Vec<f64>> = centroids.iter().map(|c| points.prepare(c)).collect();
    let mut assignments = vec![0usize; n];
    let mut inertia = 0.0;
    for (i, slot) in assignments.iter_mut().enumerate() {
        let (c, d) = nearest(i, &centroids, &prepared, None);
        *slot = c;
        inertia += d;
    }
    let mut inertia_history = vec![inertia];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        update_centroids(points, &assignments, &mut centroids);
        prepared = centroids.iter().map(|c| points.prepare(c)).collect();
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, slot) in assignments.iter_mut().enumerate() {
            let (c, d) = nearest(i, &centroids, &prepared, Some(*slot));
            changed |= c != *slot;
            *slot = c;
            inertia += d;
        }
        inertia_history.push(inertia);
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia_history,
        iterations,
        converged,
    })
}

fn seed_centroids<P: Points + ?Sized>(points: &P, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let first = points.row(rng.gen_range(0..n));
    let prepared = points.prepare(&first);
    let mut d2: Vec<f64> = (0..n).map(|i| points.sq_dist(i, &first, &prepared)).collect();
    let mut centroids = vec![first];
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&w| {
                    acc += w;
                    acc > target
                })
                .unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive weight"))
        } else {
            // Every point coincides with a centroid already.
            rng.gen_range(0..n)
        };
        let chosen = points.row(pick);
        let prepared = points.prepare(&chosen);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(points.sq_dist(i, &chosen, &prepared));
        }
        centroids.push(chosen);
    }
    centroids
}

fn update_centroids<P: Points + ?Sized>(points: &P, assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points.dim();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (i, &c) in assignments.iter().enumerate() {
        counts[c] += 1;
        points.accumulate(i, &mut sums[c]);
    }
    for ((centroid, sum), &count) in centroids.iter_mut().zip(sums).zip(&counts) {
        if count > 0 {
            *centroid = sum.into_iter().map(|s| s / count as f64).collect();
        }
    }
}

/// Categorical values held by at least `dominance_threshold` of the cluster
/// rows, as a subgroup over the whole dataset, with the per-predicate
/// dominance. `None` when no feature dominates or `rows` is empty.
pub fn describe_cluster(
    dataset: &Dataset,
    rows: &[usize],
    dominance_threshold: f64,
) -> Result<Option<(Subgroup, Vec<f64>)>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let mut predicates = Vec::new();
    let mut dominance = Vec::new();
    for (at, spec) in dataset.features().iter().enumerate() {
        if spec.kind != FeatureKind::Categorical {
            continue;
        }
        let codes = dataset.level_codes(at);
        let mut counts = vec![0usize; spec.categories.len()];
        for &r in rows {
            counts[codes[r] as usize] += 1;
        }
        // Ties go to the lower level index, i.e. the more frequent category.
        let (best, &count) = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("categorical feature has a category");
        let share = count as f64 / rows.len() as f64;
        if share >= dominance_threshold {
            predicates.push(Predicate::equals(&spec.name, &spec.categories[best]));
            dominance.push(share);
        }
    }
    if predicates.is_empty() {
        return Ok(None);
    }
    Ok(Some((Subgroup::new(dataset, predicates)?, dominance)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestConfig {
    pub ranking_rate: RateKind,
    pub k: usize,
    pub seed: u64,
    pub dominance_threshold: f64,
    pub max_iter: usize,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        Self {
            ranking_rate: RateKind::Accuracy,
            k: DEFAULT_K,
            seed: DEFAULT_SEED,
            dominance_threshold: DEFAULT_DOMINANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestedSubgroup {
    pub subgroup: Subgroup,
    pub source_cluster: usize,
    pub dominance: Vec<f64>,
    /// |subgroup rate - overall rate| on the ranking rate; 0 when either is
    /// undefined.
    pub notability: f64,
}

/// Cluster, describe, deduplicate and rank by notability (then size).
/// `k` is capped at the row count.
pub fn suggest_subgroups(dataset: &Dataset, config: &SuggestConfig) -> Result<Vec<SuggestedSubgroup>> {
    let encoding = Encoding::new(dataset)?;
    let k = config.k.clamp(1, encoding.rows);
    let result = lloyd(&encoding, k, config.seed, config.max_iter)?;
    let overall = overall_metrics(dataset);

    let mut by_predicates: BTreeMap<Vec<Predicate>, SuggestedSubgroup> = BTreeMap::new();
    for (cluster, rows) in result.clusters().iter().enumerate() {
        let Some((subgroup, dominance)) = describe_cluster(dataset, rows, config.dominance_threshold)? else {
            continue;
        };
        let v = subgroup_metrics(dataset, &subgroup)?;
        let notability = match (config.ranking_rate.of(&v), config.ranking_rate.of(&overall)) {
            (Some(s), Some(o)) => (s - o).abs(),
            _ => 0.0,
        };
        let mut key = subgroup.predicates.clone();
        key.sort();
        let candidate = SuggestedSubgroup {
            subgroup,
            source_cluster: cluster,
            dominance,
            notability,
        };
        match by_predicates.get(&key) {
            Some(existing) if existing.notability >= candidate.notability => {}
            _ => {
                by_predicates.insert(key, candidate);
            }
        }
    }
    let mut out: Vec<SuggestedSubgroup> = by_predicates.into_values().collect();
    out.sort_by(|a, b| {
        b.notability
            .total_cmp(&a.notability)
            .then(b.subgroup.size.cmp(&a.subgroup.size))
            .then_with(|| a.subgroup.display_name.cmp(&b.subgroup.display_name))
            .then(a.source_cluster.cmp(&b.source_cluster))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarSubgroup {
    pub subgroup: Subgroup,
    pub distance: f64,
}

fn mean_vector(dataset: &Dataset, encoding: &Encoding, subgroup: &Subgroup) -> Result<Option<Vec<f64>>> {
    let mask = membership_mask(dataset, subgroup)?;
    let mut sum = vec![0.0; encoding.width];
    let mut count = 0usize;
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        count += 1;
        encoding.accumulate(i, &mut sum);
    }
    Ok((count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect()))
}

/// Candidates ordered by Euclidean distance between mean encoded rows and
/// the target's. The target itself (same id) and empty groups are left out.
pub fn similar_subgroups(
    dataset: &Dataset,
    target: &Subgroup,
    candidates: &[Subgroup],
) -> Result<Vec<SimilarSubgroup>> {
    for g in std::iter::once(target).chain(candidates) {
        membership_mask(dataset, g)?;
    }
    if candidates.is_empty() || dataset.is_empty() {
        return Ok(Vec::new());
    }
    let encoding = Encoding::new(dataset)?;
    let Some(centre) = mean_vector(dataset, &encoding, target)? else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for c in candidates.iter().filter(|c| c.id != target.id) {
        if let Some(mean) = mean_vector(dataset, &encoding, c)? {
            out.push(SimilarSubgroup {
                subgroup: c.clone(),
                distance: sq_dist(&mean, &centre).sqrt(),
            });
        }
    }
    out.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.subgroup.display_name.cmp(&b.subgroup.display_name))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_dataset, IngestConfig};
    use crate::subgroup::{generate_subgroups, Selection};

    fn load(text: &str, numeric: &[&str]) -> Dataset {
        let config = IngestConfig::new("y", "yhat").with_numeric(numeric.iter().copied());
        load_dataset(text.as_bytes(), &config).unwrap()
    }

    #[test]
    fn one_hot_single_feature() {
        let ds = load("c,y,yhat\na,1,1\nb,0,0\nc,1,0\na,0,1\n", &[]);
        let enc = encode_instances(&ds).unwrap();
        for v in &enc {
            assert_eq!(v.values.len(), 3);
            assert_eq!(v.values.iter().filter(|x| **x == 1.0).count(), 1);
            assert_eq!(v.values.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn constant_numeric_encodes_as_zero() {
        let ds = load("h,y,yhat\n7,1,1\n7,0,0\n", &["h"]);
        assert!(encode_instances(&ds)
            .unwrap()
            .iter()
            .all(|v| v.values == vec![0.0]));
    }

    #[test]
    fn mixed_encoding_by_hand() {
        // s categories by frequency: F(3), M(2); h in [10, 50]
        let ds = load(
            "s,h,y,yhat\nF,10,1,1\nM,50,0,0\nF,20,1,0\nM,30,0,1\nF,40,1,1\n",
            &["h"],
        );
        let enc: Vec<Vec<f64>> = encode_instances(&ds)
            .unwrap()
            .into_iter()
            .map(|v| v.values)
            .collect();
        assert_eq!(
            enc,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 1.0],
                vec![1.0, 0.0, 0.25],
                vec![0.0, 1.0, 0.5],
                vec![1.0, 0.0, 0.75],
            ]
        );
    }

    #[test]
    fn sparse_clustering_matches_dense() {
        let ds = load(
            "s,c,h,y,yhat\nF,a,10,1,1\nM,b,50,0,0\nF,c,20,1,0\nM,a,30,0,1\nF,b,40,1,1\nM,c,45,1,1\nF,a,12,0,0\nM,b,49,1,0\n",
            &["h"],
        );
        let dense: Vec<Vec<f64>> = encode_instances(&ds)
            .unwrap()
            .into_iter()
            .map(|v| v.values)
            .collect();
        let encoding = Encoding::new(&ds).unwrap();
        for seed in 0..20 {
            let a = kmeans(&dense, 3, seed, 50).unwrap();
            let b = lloyd(&encoding, 3, seed, 50).unwrap();
            assert_eq!(a.assignments, b.assignments, "seed {seed}");
            for (x, y) in a.inertia_history.iter().zip(&b.inertia_history) {
                assert!((x - y).abs() < 1e-9, "seed {seed}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn empty_dataset_errors() {
        let ds = load("c,y,yhat\n", &[]);
        assert_eq!(encode_instances(&ds).unwrap_err(), Error::EmptyDataset);
        assert_eq!(
            suggest_subgroups(&ds, &SuggestConfig::default()).unwrap_err(),
            Error::EmptyDataset
        );
    }

    #[test]
    fn kmeans_single_cluster_is_the_mean() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 3.0]];
        let r = kmeans(&pts, 1, 7, 10).unwrap();
        assert_eq!(r.assignments, vec![0, 0, 0]);
        assert!((r.centroids[0][0] - 2.0).abs() < 1e-12);
        assert!((r.centroids[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_k_equals_n() {
        let pts = vec![vec![0.0], vec![1.0], vec![5.0], vec![9.0]];
        let r = kmeans(&pts, 4, 3, 10).unwrap();
        assert_eq!(r.inertia(), 0.0);
        let mut seen = r.assignments.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn kmeans_argument_errors() {
        let pts = vec![vec![0.0]];
        assert_eq!(
            kmeans(&pts, 2, 0, 10).unwrap_err(),
            Error::KTooLarge { k: 2, n: 1 }
        );
        assert_eq!(
            kmeans(&pts, 0, 0, 10).unwrap_err(),
            Error::KTooLarge { k: 0, n: 1 }
        );
        assert_eq!(kmeans(&pts, 1, 0, 0).unwrap_err(), Error::ZeroIterations);
    }

    #[test]
    fn kmeans_with_duplicate_points_leaves_spare_clusters_empty() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0]];
        let r = kmeans(&pts, 3, 11, 5).unwrap();
        assert_eq!(r.inertia(), 0.0);
        assert!(r.converged);
    }

    #[test]
    fn describe_cluster_dominance() {
        // 20 rows: sex M in 18, occ Sales in 17, race split evenly
        let mut text = String::from("sex,occ,race,y,yhat\n");
        for i in 0..20 {
            let sex = if i < 18 { "M" } else { "F" };
            let occ = if i < 17 { "Sales" } else { "Craft" };
            let race = if i % 2 == 0 { "A" } else { "B" };
            text.push_str(&format!("{sex},{occ},{race},1,1\n"));
        }
        let ds = load(&text, &[]);
        let rows: Vec<usize> = (0..20).collect();
        let (g, dominance) = describe_cluster(&ds, &rows, 0.8).unwrap().unwrap();
        assert_eq!(
            g.predicates,
            vec![Predicate::equals("sex", "M"), Predicate::equals("occ", "Sales")]
        );
        assert_eq!(dominance, vec![0.9, 0.85]);

        let (only_sex, _) = describe_cluster(&ds, &rows[..18], 1.0).unwrap().unwrap();
        assert_eq!(only_sex.predicates, vec![Predicate::equals("sex", "M")]);

        // race alone is uniform
        let uniform = load("race,y,yhat\nA,1,1\nB,1,1\nA,0,0\nB,0,0\n", &[]);
        assert!(describe_cluster(&uniform, &[0, 1, 2, 3], 0.8).unwrap().is_none());
    }

    #[test]
    fn uniform_performance_ranks_by_size() {
        // every prediction correct: all notabilities are zero
        let mut text = String::from("a,b,y,yhat\n");
        for (a, b, n) in [("p", "x", 12), ("q", "y", 7), ("r", "z", 3)] {
            for i in 0..n {
                let y = i % 2;
                text.push_str(&format!("{a},{b},{y},{y}\n"));
            }
        }
        let ds = load(&text, &[]);
        let config = SuggestConfig {
            k: 3,
            ..SuggestConfig::default()
        };
        let out = suggest_subgroups(&ds, &config).unwrap();
        assert!(out.iter().all(|s| s.notability == 0.0));
        let sizes: Vec<usize> = out.iter().map(|s| s.subgroup.size).collect();
        let mut sorted = sizes.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        assert_eq!(sizes, sorted);
        assert_eq!(out, suggest_subgroups(&ds, &config).unwrap());
    }

    fn ten_rows() -> Dataset {
        load(
            "sex,occ,country,y,yhat\n\
             F,A,US,1,1\nF,A,US,0,0\nF,B,US,1,1\nF,A,US,1,0\nF,B,US,0,0\n\
             M,A,US,1,1\nM,C,US,0,1\nM,C,US,1,1\nM,C,US,0,0\nM,C,US,1,1\n",
            &[],
        )
    }

    #[test]
    fn similar_subgroups_by_hand() {
        let ds = ten_rows();
        let target = Subgroup::new(
            &ds,
            vec![Predicate::equals("sex", "F"), Predicate::equals("occ", "A")],
        )
        .unwrap();
        let sibling = Subgroup::new(
            &ds,
            vec![Predicate::equals("sex", "F"), Predicate::equals("occ", "B")],
        )
        .unwrap();
        let disjoint = Subgroup::new(
            &ds,
            vec![Predicate::equals("sex", "M"), Predicate::equals("occ", "C")],
        )
        .unwrap();
        // Same rows as the target spelled with a redundant predicate.
        let twin = Subgroup::new(
            &ds,
            vec![
                Predicate::equals("sex", "F"),
                Predicate::equals("occ", "A"),
                Predicate::equals("country", "US"),
            ],
        )
        .unwrap();
        // Encoding: sex [F, M], occ [A, C, B], country [US].
        // target mean (F, A): [1,0, 1,0,0, 1]; sibling (F, B): [1,0, 0,0,1, 1] -> sqrt(2)
        // disjoint (M, C): [0,1, 0,1,0, 1] -> sqrt(4) = 2
        let out = similar_subgroups(
            &ds,
            &target,
            &[disjoint.clone(), target.clone(), sibling.clone(), twin.clone()],
        )
        .unwrap();
        let ids: Vec<&str> = out.iter().map(|s| s.subgroup.id.as_str()).collect();
        assert_eq!(
            ids,
            vec![twin.id.as_str(), sibling.id.as_str(), disjoint.id.as_str()]
        );
        assert_eq!(out[0].distance, 0.0);
        assert!((out[1].distance - 2f64.sqrt()).abs() < 1e-12);
        assert!((out[2].distance - 2.0).abs() < 1e-12);

        assert!(similar_subgroups(&ds, &target, &[]).unwrap().is_empty());
    }

    #[test]
    fn similar_subgroups_rejects_foreign_groups() {
        let ds = ten_rows();
        let other = load("sex,y,yhat\nF,1,1\n", &[]);
        let foreign = generate_subgroups(&other, &[Selection::all("sex")], 10).unwrap();
        let target = Subgroup::new(&ds, vec![Predicate::equals("sex", "F")]).unwrap();
        assert!(matches!(
            similar_subgroups(&ds, &target, &foreign),
            Err(Error::StaleSubgroup { .. })
        ));
    }
}
