//! Experiment drivers, metrics and reports.

mod cost;
mod metrics;
mod report;
mod success;

pub use cost::{attack_cost, CostModel};
pub use metrics::{auc, average_ranks, mean_std, spearman, tpr_at_fpr, MeanStd};
pub use report::{EvalReport, Experiment, OneVsRestMetrics, TopK};
pub use success::{success_vs_distinguishability, PromptPoint, SuccessBin, SuccessCurve};

use std::borrow::Cow;
use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::attribution::{build_centroid_table, fit_threshold, rank_models};
use crate::error::{Error, Result};
use crate::store::{split_reference_holdout, Dataset, ModelId, PromptId};

/// `k` values reported for top-k accuracy.
pub const TOP_K: [usize; 4] = [1, 2, 3, 5];

/// Default one-vs-rest Case 2 quantile grid.
pub const DEFAULT_ALPHAS: [f64; 4] = [0.80, 0.85, 0.90, 0.95];

/// Shared experiment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k_ref: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k_ref: 10,
            repetitions: 5,
            seed: 0,
            normalize: false,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.k_ref == 0 {
            return Err(Error::param("k_ref", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::param("repetitions", "must be at least 1"));
        }
        Ok(())
    }

    /// Split seed of repetition `r`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repetitions as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    fn experiment(&self, kind: &str, ds: &Dataset) -> Experiment {
        Experiment {
            kind: kind.to_string(),
            dataset_hash: ds.content_hash(),
            n_models: ds.models().len(),
            n_prompts: ds.prompts().len(),
            dim: ds.dim(),
            k_ref: self.k_ref,
            repetitions: self.repetitions,
            seed: self.seed,
            seeds: self.seeds(),
            normalize: self.normalize,
            target: None,
            alphas: Vec::new(),
        }
    }
}

fn prepared(ds: &Dataset, normalize: bool) -> Result<Cow<'_, Dataset>> {
    Ok(if normalize { Cow::Owned(ds.normalized()?) } else { Cow::Borrowed(ds) })
}

fn check_target(ds: &Dataset, target: ModelId) -> Result<()> {
    if ds.model_ids().any(|m| m == target) {
        Ok(())
    } else {
        Err(Error::UnknownModel(target.0))
    }
}

/// Rank of the true model for every holdout record of `prompt`.
fn true_ranks(reference: &Dataset, holdout: &Dataset, prompt: PromptId) -> Result<Vec<usize>> {
    let table = build_centroid_table(reference, prompt)?;
    holdout
        .prompt_records(prompt)
        .map(|r| {
            let ranked = rank_models(&r.vector_f64(), &table, false)?;
            ranked.rank_of(r.model).ok_or(Error::UnknownModel(r.model.0))
        })
        .collect()
}

/// Per-prompt top-1 accuracy of holdout against reference centroids.
pub(crate) fn per_prompt_top1(reference: &Dataset, holdout: &Dataset) -> Result<BTreeMap<PromptId, f64>> {
    let prompts: Vec<PromptId> = holdout.prompt_ids().collect();
    prompts
        .par_iter()
        .map(|&p| {
            let ranks = true_ranks(reference, holdout, p)?;
            if ranks.is_empty() {
                return Err(Error::Empty("prompt has no holdout records"));
            }
            Ok((p, ranks.iter().filter(|&&r| r == 1).count() as f64 / ranks.len() as f64))
        })
        .collect()
}

/// Top-k accuracy of nearest-centroid attribution over repeated random
/// reference/holdout splits.
pub fn run_multiclass(ds: &Dataset, cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let data = prepared(ds, cfg.normalize)?;
    let prompts: Vec<PromptId> = data.prompt_ids().collect();

    // per repetition, per prompt: (holdout count, hits per k)
    let per_rep = cfg
        .seeds()
        .into_par_iter()
        .map(|seed| {
            let (reference, holdout) = split_reference_holdout(&data, cfg.k_ref, seed)?;
            prompts
                .par_iter()
                .map(|&p| {
                    let ranks = true_ranks(&reference, &holdout, p)?;
                    let hits = TOP_K.map(|k| ranks.iter().filter(|&&r| r <= k).count());
                    Ok((ranks.len(), hits))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut topk = BTreeMap::new();
    for (ki, k) in TOP_K.iter().enumerate() {
        let rep_acc: Vec<f64> = per_rep
            .iter()
            .map(|rows| {
                let n: usize = rows.iter().map(|r| r.0).sum();
                rows.iter().map(|r| r.1[ki]).sum::<usize>() as f64 / n as f64
            })
            .collect();
        let prompt_acc: Vec<f64> = (0..prompts.len())
            .map(|pi| per_rep.iter().map(|rows| rows[pi].1[ki] as f64 / rows[pi].0 as f64).sum::<f64>() / per_rep.len() as f64)
            .collect();
        let reps = mean_std(&rep_acc)?;
        topk.insert(
            k.to_string(),
            TopK {
                mean: reps.mean,
                std_over_repetitions: reps.std,
                std_over_prompts: mean_std(&prompt_acc)?.std,
                per_repetition: rep_acc,
            },
        );
    }
    Ok(EvalReport {
        experiment: cfg.experiment("multiclass", ds),
        topk_accuracy: topk,
        one_vs_rest: Vec::new(),
        runtime_secs: None,
    })
}

/// Binary outcome and score for each holdout record of one prompt.
struct Scored {
    positive: bool,
    accepted: bool,
    score: f64,
}

#[derive(Clone)]
struct BinaryMetrics {
    accuracy: f64,
    auc: f64,
    fpr: f64,
    fnr: f64,
    tpr_at_1pct: f64,
    tpr_at_5pct: f64,
}

fn binary_metrics(items: &[Scored]) -> Result<BinaryMetrics> {
    let pos: Vec<f64> = items.iter().filter(|s| s.positive).map(|s| s.score).collect();
    let neg: Vec<f64> = items.iter().filter(|s| !s.positive).map(|s| s.score).collect();
    let fn_ = items.iter().filter(|s| s.positive && !s.accepted).count();
    let fp = items.iter().filter(|s| !s.positive && s.accepted).count();
    Ok(BinaryMetrics {
        accuracy: 1.0 - (fn_ + fp) as f64 / items.len() as f64,
        auc: auc(&pos, &neg)?,
        fpr: fp as f64 / neg.len() as f64,
        fnr: fn_ as f64 / pos.len() as f64,
        tpr_at_1pct: tpr_at_fpr(&pos, &neg, 0.01)?,
        tpr_at_5pct: tpr_at_fpr(&pos, &neg, 0.05)?,
    })
}

/// Averages per-prompt metrics within each repetition, then across
/// repetitions.
fn aggregate(target: ModelId, mode: &str, alpha: Option<f64>, per_rep: &[Vec<BinaryMetrics>]) -> Result<OneVsRestMetrics> {
    let field = |f: fn(&BinaryMetrics) -> f64| -> Vec<f64> {
        per_rep
            .iter()
            .map(|rows| rows.iter().map(f).sum::<f64>() / rows.len() as f64)
            .collect()
    };
    let accuracy = mean_std(&field(|m| m.accuracy))?;
    let mean = |f: fn(&BinaryMetrics) -> f64| mean_std(&field(f)).map(|m| m.mean);
    Ok(OneVsRestMetrics {
        target,
        mode: mode.to_string(),
        alpha,
        accuracy: accuracy.mean,
        accuracy_std_over_repetitions: accuracy.std,
        auc: mean(|m| m.auc)?,
        fpr: mean(|m| m.fpr)?,
        fnr: mean(|m| m.fnr)?,
        tpr_at_1pct: mean(|m| m.tpr_at_1pct)?,
        tpr_at_5pct: mean(|m| m.tpr_at_5pct)?,
    })
}

fn full_rows(data: &Dataset, target: ModelId, cfg: &RunConfig) -> Result<Vec<Vec<BinaryMetrics>>> {
    let prompts: Vec<PromptId> = data.prompt_ids().collect();
    cfg.seeds()
        .into_par_iter()
        .map(|seed| {
            let (reference, holdout) = split_reference_holdout(data, cfg.k_ref, seed)?;
            prompts
                .par_iter()
                .map(|&p| {
                    let table = build_centroid_table(&reference, p)?;
                    let items = holdout
                        .prompt_records(p)
                        .map(|r| {
                            let ranked = rank_models(&r.vector_f64(), &table, false)?;
                            let d_t = ranked.distance_of(target).ok_or(Error::UnknownModel(target.0))?;
                            let d_other = ranked
                                .ranking
                                .iter()
                                .filter(|(m, _)| *m != target)
                                .map(|(_, d)| *d)
                                .fold(f64::INFINITY, f64::min);
                            Ok(Scored {
                                positive: r.model == target,
                                accepted: ranked.top() == target,
                                score: d_other - d_t,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    binary_metrics(&items)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Case 1: the attacker holds references for every model and flags a
/// holdout image as the target's when the target centroid is nearest.
/// AUC ranks by the margin `min_{j≠t} d_j − d_t`.
pub fn run_one_vs_rest_full(ds: &Dataset, target: ModelId, cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    check_target(ds, target)?;
    let data = prepared(ds, cfg.normalize)?;
    let rows = full_rows(&data, target, cfg)?;
    let mut experiment = cfg.experiment("one-vs-rest-full", ds);
    experiment.target = Some(target);
    Ok(EvalReport {
        experiment,
        topk_accuracy: BTreeMap::new(),
        one_vs_rest: vec![aggregate(target, "full", None, &rows)?],
        runtime_secs: None,
    })
}

fn limited_rows(data: &Dataset, target: ModelId, alphas: &[f64], cfg: &RunConfig) -> Result<Vec<Vec<Vec<BinaryMetrics>>>> {
    let prompts: Vec<PromptId> = data.prompt_ids().collect();
    // [repetition][prompt][alpha]
    cfg.seeds()
        .into_par_iter()
        .map(|seed| {
            let (reference, holdout) = split_reference_holdout(data, cfg.k_ref, seed)?;
            prompts
                .par_iter()
                .map(|&p| {
                    let refs = reference.cell_vectors(p, target);
                    if refs.is_empty() {
                        return Err(Error::MissingCell {
                            model: target.0,
                            prompt: p.0,
                        });
                    }
                    let queries: Vec<(bool, Vec<f64>)> = holdout
                        .prompt_records(p)
                        .map(|r| (r.model == target, r.vector_f64()))
                        .collect();
                    alphas
                        .iter()
                        .map(|&alpha| {
                            let th = fit_threshold(&refs, alpha)?;
                            let items = queries
                                .iter()
                                .map(|(positive, v)| {
                                    let d = th.distance(v)?;
                                    Ok(Scored {
                                        positive: *positive,
                                        accepted: d <= th.lambda,
                                        score: -d,
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?;
                            binary_metrics(&items)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::Empty("alpha grid"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::param("alpha", format!("{a} not in (0, 1]")));
    }
    Ok(())
}

fn limited_metrics(data: &Dataset, target: ModelId, alphas: &[f64], cfg: &RunConfig) -> Result<Vec<OneVsRestMetrics>> {
    let rows = limited_rows(data, target, alphas, cfg)?;
    alphas
        .iter()
        .enumerate()
        .map(|(ai, &alpha)| {
            let per_rep: Vec<Vec<BinaryMetrics>> = rows
                .iter()
                .map(|prompts| prompts.iter().map(|per_alpha| per_alpha[ai].clone()).collect())
                .collect();
            aggregate(target, "limited", Some(alpha), &per_rep)
        })
        .collect()
}

/// Case 2: the attacker holds references for the target only and accepts
/// a holdout image when it lies within the target's α-quantile radius.
/// AUC ranks by negated distance to the target centroid.
pub fn run_one_vs_rest_limited(ds: &Dataset, target: ModelId, alphas: &[f64], cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    check_target(ds, target)?;
    check_alphas(alphas)?;
    let data = prepared(ds, cfg.normalize)?;
    let mut experiment = cfg.experiment("one-vs-rest-limited", ds);
    experiment.target = Some(target);
    experiment.alphas = alphas.to_vec();
    Ok(EvalReport {
        experiment,
        topk_accuracy: BTreeMap::new(),
        one_vs_rest: limited_metrics(&data, target, alphas, cfg)?,
        runtime_secs: None,
    })
}

/// Multiclass top-k plus both one-vs-rest cases for every model.
pub fn run_full_report(ds: &Dataset, alphas: &[f64], cfg: &RunConfig) -> Result<EvalReport> {
    check_alphas(alphas)?;
    let mut report = run_multiclass(ds, cfg)?;
    let data = prepared(ds, cfg.normalize)?;
    for target in data.model_ids() {
        report.one_vs_rest.push(aggregate(target, "full", None, &full_rows(&data, target, cfg)?)?);
        report.one_vs_rest.extend(limited_metrics(&data, target, alphas, cfg)?);
    }
    report.experiment.kind = "full".to_string();
    report.experiment.alphas = alphas.to_vec();
    Ok(report)
}
