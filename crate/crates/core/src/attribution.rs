//! Nearest-centroid deanonymization.
//!
//! For each prompt the attacker embeds `k` reference generations per model,
//! averages them into a centroid, and attributes a leaderboard image to the
//! model whose centroid is closest in Euclidean distance. Two one-vs-rest
//! detectors build on the same geometry: one that sees every model's
//! centroid, and one that only knows the target's cluster and accepts
//! anything within an in-cluster distance quantile.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{euclidean, l2_normalize, Dataset, ModelId, PromptId};

/// Componentwise arithmetic mean.
pub fn compute_centroid<V: AsRef<[f64]>>(embs: &[V]) -> Result<Vec<f64>> {
    let first = embs.first().ok_or(Error::Empty("centroid needs at least one embedding"))?;
    let d = first.as_ref().len();
    let mut sum = vec![0.0; d];
    for e in embs {
        let e = e.as_ref();
        if e.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: e.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(e) {
            *s += x;
        }
    }
    let k = embs.len() as f64;
    Ok(sum.into_iter().map(|s| s / k).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidEntry {
    pub centroid: Vec<f64>,
    /// Number of reference embeddings averaged.
    pub k: usize,
}

/// Per-model centroids for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidTable {
    pub prompt: PromptId,
    pub dim: usize,
    pub entries: BTreeMap<ModelId, CentroidEntry>,
}

impl CentroidTable {
    /// Builds a table from per-model reference embeddings.
    pub fn from_references<V: AsRef<[f64]>>(
        prompt: PromptId,
        refs: impl IntoIterator<Item = (ModelId, Vec<V>)>,
    ) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut dim = None;
        for (model, embs) in refs {
            let centroid = compute_centroid(&embs)?;
            match dim {
                None => dim = Some(centroid.len()),
                Some(d) if d != centroid.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: centroid.len(),
                    })
                }
                _ => {}
            }
            entries.insert(
                model,
                CentroidEntry {
                    centroid,
                    k: embs.len(),
                },
            );
        }
        let dim = dim.ok_or(Error::Empty("centroid table needs at least one model"))?;
        Ok(Self { prompt, dim, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn centroid(&self, model: ModelId) -> Option<&[f64]> {
        self.entries.get(&model).map(|e| e.centroid.as_slice())
    }
}

/// One centroid per model of `reference` for `prompt`. Every model in the
/// dataset must have at least one record under the prompt.
pub fn build_centroid_table(reference: &Dataset, prompt: PromptId) -> Result<CentroidTable> {
    let refs = reference
        .model_ids()
        .map(|model| {
            let embs = reference.cell_vectors(prompt, model);
            if embs.is_empty() {
                Err(Error::MissingCell {
                    model: model.0,
                    prompt: prompt.0,
                })
            } else {
                Ok((model, embs))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    CentroidTable::from_references(prompt, refs)
}

/// Models ordered by ascending distance to the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub ranking: Vec<(ModelId, f64)>,
}

impl RankedPrediction {
    pub fn top(&self) -> ModelId {
        self.ranking[0].0
    }

    /// 1-based position of `model`, if ranked.
    pub fn rank_of(&self, model: ModelId) -> Option<usize> {
        self.ranking.iter().position(|(m, _)| *m == model).map(|i| i + 1)
    }

    pub fn distance_of(&self, model: ModelId) -> Option<f64> {
        self.ranking.iter().find(|(m, _)| *m == model).map(|(_, d)| *d)
    }
}

fn prepare_query(e_star: &[f64], dim: usize, normalize: bool) -> Result<std::borrow::Cow<'_, [f64]>> {
    if e_star.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: e_star.len(),
        });
    }
    Ok(if normalize {
        std::borrow::Cow::Owned(l2_normalize(e_star)?)
    } else {
        std::borrow::Cow::Borrowed(e_star)
    })
}

/// Euclidean distance from `e_star` (unit-normalized first when
/// `normalize`) to every centroid, ascending; equal distances keep
/// ascending model id.
pub fn rank_models(e_star: &[f64], table: &CentroidTable, normalize: bool) -> Result<RankedPrediction> {
    let q = prepare_query(e_star, table.dim, normalize)?;
    let mut ranking: Vec<(ModelId, f64)> = table
        .entries
        .iter()
        .map(|(&m, e)| (m, euclidean(&q, &e.centroid)))
        .collect();
    // entries iterate in id order and the sort is stable
    ranking.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(RankedPrediction { ranking })
}

/// The closest model; ties resolve to the smallest id.
pub fn classify(e_star: &[f64], table: &CentroidTable, normalize: bool) -> Result<ModelId> {
    let q = prepare_query(e_star, table.dim, normalize)?;
    let mut best: Option<(ModelId, f64)> = None;
    for (&m, e) in &table.entries {
        let d = euclidean(&q, &e.centroid);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((m, d));
        }
    }
    best.map(|(m, _)| m).ok_or(Error::Empty("centroid table is empty"))
}

/// Case 1 one-vs-rest: with every model's centroid available, the image is
/// attributed to `target` iff `target` wins the nearest-centroid argmin.
pub fn one_vs_rest_full(e_star: &[f64], table: &CentroidTable, target: ModelId, normalize: bool) -> Result<bool> {
    if !table.entries.contains_key(&target) {
        return Err(Error::UnknownModel(target.0));
    }
    Ok(classify(e_star, table, normalize)? == target)
}

/// Case 2 detector state: a centroid and an acceptance radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterThreshold {
    pub centroid: Vec<f64>,
    pub alpha: f64,
    /// Nearest-rank `alpha`-quantile of the reference in-cluster distances.
    pub lambda: f64,
    pub k: usize,
}

/// Nearest-rank quantile: the `ceil(alpha * n)`-th smallest value.
pub fn nearest_rank_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile of empty set"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("{alpha} not in (0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against alpha * n landing a hair above an integer
    let rank = ((alpha * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

/// Fits the Case 2 radius on the target model's reference embeddings.
pub fn fit_threshold<V: AsRef<[f64]>>(reference: &[V], alpha: f64) -> Result<ClusterThreshold> {
    if reference.len() < 2 {
        return Err(Error::param("reference", "need at least 2 embeddings"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("{alpha} not in (0, 1]")));
    }
    let centroid = compute_centroid(reference)?;
    let distances: Vec<f64> = reference.iter().map(|x| euclidean(x.as_ref(), &centroid)).collect();
    let lambda = nearest_rank_quantile(&distances, alpha)?;
    Ok(ClusterThreshold {
        centroid,
        alpha,
        lambda,
        k: reference.len(),
    })
}

impl ClusterThreshold {
    pub fn distance(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.centroid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.centroid.len(),
                found: z.len(),
            });
        }
        Ok(euclidean(z, &self.centroid))
    }
}

/// Case 2 one-vs-rest: accept iff `‖z − c‖ ≤ λ` (inclusive).
pub fn one_vs_rest_limited(z: &[f64], th: &ClusterThreshold) -> Result<bool> {
    Ok(th.distance(z)? <= th.lambda)
}
