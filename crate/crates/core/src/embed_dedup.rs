//! Near-duplicate removal over instruction data by embedding similarity.
//!
//! Records are embedded as `instruction + "\n" + question`, compared
//! pairwise, and joined into clusters with union-find. One record per
//! cluster survives; the rest keep a `cluster_id` annotation so preference
//! building can find them.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::EmbeddingProvider;
use crate::sft::InstructionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Duplicate when cosine similarity >= threshold.
    #[default]
    CosineSimilarity,
    /// Duplicate when 1 - cosine similarity <= threshold.
    CosineDistance,
    /// Duplicate when the Euclidean distance of unit vectors <= threshold.
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedDedupConfig {
    pub threshold: f64,
    pub metric: Metric,
    /// Restrict exact comparisons to pairs surviving a random-projection
    /// window test. Never loses a pair the exact search would find.
    pub prefilter: bool,
    pub projections: usize,
    pub seed: u64,
}

impl Default for EmbedDedupConfig {
    fn default() -> Self {
        EmbedDedupConfig {
            threshold: 0.76,
            metric: Metric::CosineSimilarity,
            prefilter: false,
            projections: 4,
            seed: 0,
        }
    }
}

impl EmbedDedupConfig {
    pub fn validate(&self) -> Result<()> {
        let t = self.threshold;
        let upper = if self.metric == Metric::Euclidean {
            2.0
        } else {
            1.0
        };
        if !(t > 0.0 && t < upper) {
            return Err(Error::config(format!(
                "embed dedup threshold must be in (0, {upper}), got {t}"
            )));
        }
        if self.prefilter && self.projections == 0 {
            return Err(Error::config("prefilter needs at least one projection"));
        }
        Ok(())
    }

    /// The cosine similarity at or above which two unit vectors are
    /// duplicates under the configured metric.
    pub fn min_similarity(&self) -> f64 {
        match self.metric {
            Metric::CosineSimilarity => self.threshold,
            Metric::CosineDistance => 1.0 - self.threshold,
            Metric::Euclidean => 1.0 - self.threshold * self.threshold / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarPair {
    pub first: String,
    pub second: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DupCluster {
    /// Stable name of the cluster: its lowest member id.
    pub cluster_id: String,
    pub representative_id: String,
    /// Sorted by id.
    pub member_ids: Vec<String>,
    /// Every compared pair inside the cluster at or above the threshold.
    pub pair_similarities: Vec<SimilarPair>,
}

/// Embedded records in input order, as (id, unit vector).
pub type Embeddings = Vec<(String, Vec<f64>)>;

pub fn embed_text(rec: &InstructionRecord) -> String {
    rec.prompt()
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Embeds records in provider-sized batches (run concurrently) and
/// L2-normalises the vectors.
pub fn embed_records(
    records: &[InstructionRecord],
    provider: &dyn EmbeddingProvider,
) -> Result<Embeddings> {
    let mut seen = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(prev) = seen.insert(r.id.as_str(), i) {
            return Err(Error::record(
                &r.id,
                format!("duplicate id (records {prev} and {i})"),
            ));
        }
    }
    let size = provider.batch_size().max(1);
    let texts: Vec<String> = records.iter().map(embed_text).collect();
    let batches: Vec<Vec<Vec<f64>>> = texts
        .par_chunks(size)
        .enumerate()
        .map(|(b, batch)| {
            let out = provider.embed(batch).map_err(|e| {
                Error::data(format!(
                    "embedding batch {b} (records {}..{}) failed: {e}",
                    b * size,
                    b * size + batch.len()
                ))
            })?;
            if out.len() != batch.len() {
                return Err(Error::data(format!(
                    "embedding batch {b} returned {} vectors for {} texts",
                    out.len(),
                    batch.len()
                )));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut dim = None;
    let mut out = Vec::with_capacity(records.len());
    for (rec, mut v) in records.iter().zip(batches.into_iter().flatten()) {
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(Error::record(
                    &rec.id,
                    format!("embedding dimension {} differs from {d}", v.len()),
                ))
            }
            _ => {}
        }
        if !normalize(&mut v) {
            return Err(Error::record(
                &rec.id,
                "embedding has zero or non-finite norm",
            ));
        }
        out.push((rec.id.clone(), v));
    }
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Every pair `(i, j, similarity)` with `i < j` at or above `min_sim`,
/// by exhaustive comparison.
pub fn exact_pairs(vectors: &[&[f64]], min_sim: f64) -> Vec<(usize, usize, f64)> {
    (0..vectors.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..vectors.len()).filter_map(move |j| {
                let s = dot(vectors[i], vectors[j]);
                (s >= min_sim).then_some((i, j, s))
            })
        })
        .collect()
}

/// Candidate pairs from a projection-window test, verified exactly.
///
/// For unit vectors with cosine >= `min_sim`, `|a - b| <= r` where
/// `r = sqrt(2 - 2 min_sim)`, so their projections on any unit direction
/// differ by at most `r`. Pairs outside that window on any direction are
/// skipped without losing a true pair.
pub fn prefiltered_pairs(
    vectors: &[&[f64]],
    min_sim: f64,
    projections: usize,
    seed: u64,
) -> Vec<(usize, usize, f64)> {
    let n = vectors.len();
    if n < 2 {
        return Vec::new();
    }
    let dim = vectors[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..projections.max(1))
        .map(|_| loop {
            let mut d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if normalize(&mut d) {
                break d;
            }
        })
        .collect();
    let proj: Vec<Vec<f64>> = dirs
        .iter()
        .map(|d| vectors.iter().map(|v| dot(v, d)).collect())
        .collect();
    let radius = (2.0 - 2.0 * min_sim).max(0.0).sqrt() + 1e-9;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| proj[0][a].total_cmp(&proj[0][b]).then(a.cmp(&b)));
    let mut pairs: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let i = order[k];
            let proj = &proj;
            let order = &order;
            order[k + 1..]
                .iter()
                .take_while(move |&&j| proj[0][j] - proj[0][i] <= radius)
                .filter_map(move |&j| {
                    if proj[1..].iter().any(|p| (p[i] - p[j]).abs() > radius) {
                        return None;
                    }
                    let s = dot(vectors[i], vectors[j]);
                    (s >= min_sim).then_some((i.min(j), i.max(j), s))
                })
        })
        .collect();
    pairs.sort_by_key(|p| (p.0, p.1));
    pairs
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Groups vectors whose similarity meets the configured threshold into
/// connected components of size >= 2. Clusters are sorted by id.
pub fn find_near_duplicates(
    vectors: &Embeddings,
    cfg: &EmbedDedupConfig,
) -> Result<Vec<DupCluster>> {
    cfg.validate()?;
    let min_sim = cfg.min_similarity();
    let views: Vec<&[f64]> = vectors.iter().map(|(_, v)| v.as_slice()).collect();
    let pairs = if cfg.prefilter {
        prefiltered_pairs(&views, min_sim, cfg.projections, cfg.seed)
    } else {
        exact_pairs(&views, min_sim)
    };
    Ok(clusters_from_pairs(vectors, &pairs))
}

fn clusters_from_pairs(vectors: &Embeddings, pairs: &[(usize, usize, f64)]) -> Vec<DupCluster> {
    let mut uf = UnionFind::new(vectors.len());
    for &(i, j, _) in pairs {
        uf.union(i, j);
    }
    type Group = (Vec<usize>, Vec<(usize, usize, f64)>);
    let mut groups: BTreeMap<usize, Group> = BTreeMap::new();
    for i in 0..vectors.len() {
        let root = uf.find(i);
        groups.entry(root).or_default().0.push(i);
    }
    for &p in pairs {
        let root = uf.find(p.0);
        groups.entry(root).or_default().1.push(p);
    }
    let id = |i: usize| vectors[i].0.clone();
    let mut clusters: Vec<DupCluster> = groups
        .into_values()
        .filter(|(members, _)| members.len() >= 2)
        .map(|(members, edges)| {
            let mut member_ids: Vec<String> = members.into_iter().map(id).collect();
            member_ids.sort();
            DupCluster {
                cluster_id: member_ids[0].clone(),
                representative_id: member_ids[0].clone(),
                member_ids,
                pair_similarities: edges
                    .into_iter()
                    .map(|(i, j, s)| SimilarPair {
                        first: id(i),
                        second: id(j),
                        similarity: s,
                    })
                    .collect(),
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
    clusters
}

/// Keeps one representative per cluster.
///
/// When every member carries an IFD score, the highest-scoring member (ties
/// to the lower id) replaces the lowest-id representative, and the cluster
/// is updated to match. Clustered records, kept or removed, get the
/// cluster's id in `annotations.cluster_id`. Input order is preserved.
pub fn collapse_clusters(
    records: Vec<InstructionRecord>,
    clusters: &mut [DupCluster],
) -> Result<(Vec<InstructionRecord>, Vec<InstructionRecord>)> {
    let index: HashMap<&str, &InstructionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut role: HashMap<String, (String, bool)> = HashMap::new();
    for c in clusters.iter_mut() {
        let mut scored = Vec::with_capacity(c.member_ids.len());
        for id in &c.member_ids {
            let rec = index.get(id.as_str()).ok_or_else(|| {
                Error::record(
                    id,
                    format!("cluster {} references an unknown record", c.cluster_id),
                )
            })?;
            scored.push((id.clone(), rec.annotations.ifd_score));
        }
        if scored.iter().all(|(_, s)| s.is_some()) {
            let best = scored
                .iter()
                .max_by(|a, b| {
                    a.1.unwrap()
                        .total_cmp(&b.1.unwrap())
                        .then_with(|| b.0.cmp(&a.0))
                })
                .expect("cluster has members");
            c.representative_id = best.0.clone();
        }
        for id in &c.member_ids {
            role.insert(
                id.clone(),
                (c.cluster_id.clone(), *id == c.representative_id),
            );
        }
    }
    let mut kept = Vec::with_capacity(records.len());
    let mut removed = Vec::new();
    for mut rec in records {
        match role.get(&rec.id) {
            None => kept.push(rec),
            Some((cluster_id, is_rep)) => {
                rec.annotations.cluster_id = Some(cluster_id.clone());
                if *is_rep {
                    kept.push(rec);
                } else {
                    removed.push(rec);
                }
            }
        }
    }
    Ok((kept, removed))
}
