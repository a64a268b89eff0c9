//! Prompt-level distinguishability.
//!
//! For one prompt, pool every model's generations and ask, for each
//! embedding, whether its nearest neighbour (excluding itself) comes from
//! the same model. `frac` is the per-model hit rate; a model is separable
//! when `frac > tau`, and the prompt's score `D` is the fraction of
//! separable models.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{l2_normalize, squared_euclidean, Dataset, ModelId, PromptId};

pub const DEFAULT_TAU: f64 = 0.75;

/// Joint embedding set of all models for a single prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptPool {
    prompt: PromptId,
    dim: usize,
    /// Ascending model id.
    groups: Vec<(ModelId, Vec<Vec<f64>>)>,
}

impl PromptPool {
    pub fn new(prompt: PromptId, mut groups: Vec<(ModelId, Vec<Vec<f64>>)>) -> Result<Self> {
        groups.sort_by_key(|g| g.0);
        if groups.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("pool", "duplicate model"));
        }
        if groups.len() < 2 {
            return Err(Error::param("pool", format!("prompt {prompt}: need at least 2 models, found {}", groups.len())));
        }
        if let Some((m, g)) = groups.iter().find(|(_, g)| g.len() < 2) {
            return Err(Error::param(
                "pool",
                format!("prompt {prompt}: model {m} has {} embeddings, need at least 2", g.len()),
            ));
        }
        let dim = groups[0].1[0].len();
        for (_, g) in &groups {
            if let Some(bad) = g.iter().find(|v| v.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: bad.len(),
                });
            }
        }
        Ok(Self { prompt, dim, groups })
    }

    /// Pool of every model in `ds` that has records under `prompt`.
    pub fn from_dataset(ds: &Dataset, prompt: PromptId) -> Result<Self> {
        let groups = ds
            .model_ids()
            .map(|m| (m, ds.cell_vectors(prompt, m)))
            .filter(|(_, v)| !v.is_empty())
            .collect();
        Self::new(prompt, groups)
    }

    pub fn prompt(&self) -> PromptId {
        self.prompt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn models(&self) -> impl Iterator<Item = ModelId> + '_ {
        self.groups.iter().map(|g| g.0)
    }

    pub fn n_models(&self) -> usize {
        self.groups.len()
    }

    fn group(&self, model: ModelId) -> Result<&[Vec<f64>]> {
        self.groups
            .iter()
            .find(|g| g.0 == model)
            .map(|g| g.1.as_slice())
            .ok_or(Error::UnknownModel(model.0))
    }

    fn normalized(&self) -> Result<Self> {
        let groups = self
            .groups
            .iter()
            .map(|(m, g)| Ok((*m, g.iter().map(|v| l2_normalize(v)).collect::<Result<Vec<_>>>()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            groups,
            ..self.clone()
        })
    }

    fn prepared(&self, normalize: bool) -> Result<std::borrow::Cow<'_, Self>> {
        Ok(if normalize {
            std::borrow::Cow::Owned(self.normalized()?)
        } else {
            std::borrow::Cow::Borrowed(self)
        })
    }

    /// Leave-one-out nearest neighbour of the `position`-th embedding of
    /// `model`. Ties go to the smaller (model, position).
    fn nearest(&self, model: ModelId, position: usize) -> Result<(ModelId, usize)> {
        let q = self
            .group(model)?
            .get(position)
            .ok_or_else(|| Error::param("position", format!("{position} out of range for model {model}")))?;
        let mut best: Option<((ModelId, usize), f64)> = None;
        for (m, g) in &self.groups {
            for (j, v) in g.iter().enumerate() {
                if *m == model && j == position {
                    continue;
                }
                let d = squared_euclidean(q, v);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some(((*m, j), d));
                }
            }
        }
        // at least one same-model neighbour exists by construction
        Ok(best.expect("pool has at least two embeddings").0)
    }

    fn hits(&self, model: ModelId) -> Result<usize> {
        let n = self.group(model)?.len();
        (0..n)
            .map(|j| self.nearest(model, j).map(|(m, _)| usize::from(m == model)))
            .sum()
    }
}

/// Model label of the leave-one-out nearest neighbour of one pooled embedding.
pub fn nn_label(model: ModelId, position: usize, pool: &PromptPool, normalize: bool) -> Result<ModelId> {
    Ok(pool.prepared(normalize)?.nearest(model, position)?.0)
}

/// Fraction of `model`'s embeddings whose nearest neighbour is same-model.
pub fn frac(model: ModelId, pool: &PromptPool, normalize: bool) -> Result<f64> {
    let pool = pool.prepared(normalize)?;
    let k = pool.group(model)?.len();
    Ok(pool.hits(model)? as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityScore {
    pub prompt: PromptId,
    pub frac: BTreeMap<ModelId, f64>,
    /// Fraction of models with `frac > tau`.
    pub d: f64,
    pub tau: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::param("tau", format!("{tau} not in (0, 1)")))
    }
}

pub fn prompt_distinguishability(pool: &PromptPool, tau: f64, normalize: bool) -> Result<DistinguishabilityScore> {
    check_tau(tau)?;
    let pool = pool.prepared(normalize)?;
    let per_model = pool
        .groups
        .par_iter()
        .map(|(m, g)| Ok((*m, pool.hits(*m)?, g.len())))
        .collect::<Result<Vec<_>>>()?;

    let mut separable = 0usize;
    let mut fracs = BTreeMap::new();
    for (m, hits, k) in per_model {
        // strict inequality, compared without rounding: hits / k > tau
        if hits as f64 > tau * k as f64 {
            separable += 1;
        }
        fracs.insert(m, hits as f64 / k as f64);
    }
    Ok(DistinguishabilityScore {
        prompt: pool.prompt,
        frac: fracs,
        d: separable as f64 / pool.n_models() as f64,
        tau,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptFailure {
    pub prompt: PromptId,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRanking {
    /// Descending `d`, ties by ascending prompt id.
    pub scores: Vec<DistinguishabilityScore>,
    /// Prompts whose pool was invalid.
    pub failures: Vec<PromptFailure>,
}

/// Scores every prompt of `ds` and orders them by vulnerability.
pub fn rank_prompts(ds: &Dataset, tau: f64, normalize: bool) -> Result<PromptRanking> {
    check_tau(tau)?;
    let results: Vec<(PromptId, Result<DistinguishabilityScore>)> = ds
        .prompt_ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|p| {
            let r = PromptPool::from_dataset(ds, p).and_then(|pool| prompt_distinguishability(&pool, tau, normalize));
            (p, r)
        })
        .collect();

    let mut scores = Vec::new();
    let mut failures = Vec::new();
    for (prompt, r) in results {
        match r {
            Ok(s) => scores.push(s),
            Err(e) => failures.push(PromptFailure {
                prompt,
                error: e.to_string(),
            }),
        }
    }
    // stable: input is in ascending prompt order
    scores.sort_by(|a, b| b.d.total_cmp(&a.d));
    Ok(PromptRanking { scores, failures })
}

/// Prompts scoring at least `min_score`, most distinguishable first.
pub fn select_prompts(ds: &Dataset, min_score: f64, tau: f64, normalize: bool) -> Result<Vec<PromptId>> {
    if !(0.0..=1.0).contains(&min_score) {
        return Err(Error::param("min_score", format!("{min_score} not in [0, 1]")));
    }
    Ok(rank_prompts(ds, tau, normalize)?
        .scores
        .into_iter()
        .filter(|s| s.d >= min_score)
        .map(|s| s.prompt)
        .collect())
}

/// CSV with header `prompt_id,D,frac_<model>...`; cells for models absent
/// from a prompt are left empty.
pub fn scores_to_csv(scores: &[DistinguishabilityScore], models: &[ModelId]) -> String {
    let mut out = String::from("prompt_id,D");
    for m in models {
        let _ = write!(out, ",frac_{m}");
    }
    out.push('\n');
    for s in scores {
        let _ = write!(out, "{},{}", s.prompt, s.d);
        for m in models {
            match s.frac.get(m) {
                Some(f) => {
                    let _ = write!(out, ",{f}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
