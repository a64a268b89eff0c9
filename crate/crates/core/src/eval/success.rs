use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{per_prompt_top1, prepared, spearman};
use crate::distinguishability::{prompt_distinguishability, PromptPool};
use crate::error::{Error, Result};
use crate::store::{split_reference_holdout, Dataset, PromptId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPoint {
    pub prompt: PromptId,
    pub d: f64,
    pub success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessBin {
    pub lo: f64,
    pub hi: f64,
    /// `None` when no prompt falls in the bin.
    pub mean_success: Option<f64>,
    pub n_prompts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub tau: f64,
    pub k_ref: usize,
    pub seed: u64,
    pub bins: Vec<SuccessBin>,
    pub points: Vec<PromptPoint>,
    /// Rank correlation of `d` and success; `None` if either is constant.
    pub spearman: Option<f64>,
}

impl SuccessCurve {
    /// Mean success over prompts with `d >= min_d`.
    pub fn mean_success_at_least(&self, min_d: f64) -> Option<f64> {
        let sel: Vec<f64> = self.points.iter().filter(|p| p.d >= min_d).map(|p| p.success).collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    }

    /// `bin_lo,bin_hi,mean_success,n_prompts`; empty bins leave
    /// `mean_success` blank.
    pub fn bins_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,mean_success,n_prompts\n");
        for b in &self.bins {
            let m = b.mean_success.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", b.lo, b.hi, m, b.n_prompts));
        }
        out
    }

    pub fn points_csv(&self) -> String {
        let mut out = String::from("prompt_id,D,top1\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.prompt, p.d, p.success));
        }
        out
    }
}

/// Per-prompt distinguishability on the reference split against per-prompt
/// top-1 success on the holdout of the same split, bucketed into `bins`
/// equal-width bins over `[0, 1]` (the last bin is closed).
pub fn success_vs_distinguishability(
    ds: &Dataset,
    tau: f64,
    bins: usize,
    k_ref: usize,
    seed: u64,
    normalize: bool,
) -> Result<SuccessCurve> {
    if bins < 2 {
        return Err(Error::param("bins", "need at least 2 bins"));
    }
    if k_ref < 2 {
        return Err(Error::param("k_ref", "distinguishability needs at least 2 references per cell"));
    }
    let data = prepared(ds, normalize)?;
    let (reference, holdout) = split_reference_holdout(&data, k_ref, seed)?;
    let success = per_prompt_top1(&reference, &holdout)?;
    let prompts: Vec<PromptId> = reference.prompt_ids().collect();
    let points = prompts
        .par_iter()
        .map(|&p| {
            let pool = PromptPool::from_dataset(&reference, p)?;
            let score = prompt_distinguishability(&pool, tau, false)?;
            Ok(PromptPoint {
                prompt: p,
                d: score.d,
                success: success[&p],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sums = vec![(0.0, 0usize); bins];
    for pt in &points {
        let b = ((pt.d * bins as f64).floor() as usize).min(bins - 1);
        sums[b].0 += pt.success;
        sums[b].1 += 1;
    }
    let bins_out = sums
        .into_iter()
        .enumerate()
        .map(|(i, (s, n))| SuccessBin {
            lo: i as f64 / bins as f64,
            hi: (i + 1) as f64 / bins as f64,
            mean_success: (n > 0).then(|| s / n as f64),
            n_prompts: n,
        })
        .collect();
    let ds_: Vec<f64> = points.iter().map(|p| p.d).collect();
    let ss: Vec<f64> = points.iter().map(|p| p.success).collect();
    let rho = match spearman(&ds_, &ss) {
        Ok(r) => Some(r),
        Err(Error::UndefinedCorrelation(_) | Error::Empty(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SuccessCurve {
        tau,
        k_ref,
        seed,
        bins: bins_out,
        points,
        spearman: rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{generate_synthetic, Dataset, EmbeddingRecord, SynthConfig};

    /// Prompts whose clusters use one of `ratios` as separation.
    pub(crate) fn mixed_separation(ratios: &[f64], prompts_per_level: usize, n_models: usize, k: usize, seed: u64) -> Dataset {
        let mut records = Vec::new();
        let mut pid = 0u32;
        for (li, &ratio) in ratios.iter().enumerate() {
            let part = generate_synthetic(&SynthConfig {
                dim: 16,
                n_models,
                n_prompts: prompts_per_level,
                k_per_cell: k,
                inter_sep: ratio,
                intra_std: 1.0,
                rng_seed: seed + li as u64,
            })
            .unwrap();
            for r in part.records() {
                records.push(EmbeddingRecord {
                    prompt: PromptId(pid + r.prompt.0),
                    ..r.clone()
                });
            }
            pid += prompts_per_level as u32;
        }
        Dataset::new(
            16,
            crate::store::numbered_models(n_models),
            crate::store::numbered_prompts(pid as usize),
            records,
        )
        .unwrap()
    }

    #[test]
    fn single_separation_lands_in_one_bin() {
        let ds = mixed_separation(&[20.0], 4, 5, 12, 1);
        let c = success_vs_distinguishability(&ds, 0.75, 4, 6, 0, false).unwrap();
        assert_eq!(c.bins.iter().filter(|b| b.n_prompts > 0).count(), 1);
        assert_eq!(c.bins[3].n_prompts, 4);
        assert_eq!(c.spearman, None);
        assert_eq!(c.mean_success_at_least(1.0), Some(1.0));
    }

    #[test]
    fn bucket_means_rise_with_distinguishability() {
        let ds = mixed_separation(&[0.0, 3.0, 5.0, 8.0, 12.0], 6, 8, 20, 2);
        let c = success_vs_distinguishability(&ds, 0.75, 5, 10, 0, false).unwrap();
        let means: Vec<(f64, usize)> = c.bins.iter().filter_map(|b| b.mean_success.map(|m| (m, b.n_prompts))).collect();
        let inversions = means
            .windows(2)
            .filter(|w| w[1].0 < w[0].0 && w[0].1.min(w[1].1) < 10)
            .count();
        let hard = means.windows(2).filter(|w| w[1].0 < w[0].0 && w[0].1.min(w[1].1) >= 10).count();
        assert!(inversions <= 1 && hard == 0, "{means:?}");
        assert!(c.spearman.unwrap() > 0.5);
    }

    #[test]
    fn csv_shapes() {
        let ds = mixed_separation(&[0.0, 12.0], 2, 4, 8, 3);
        let c = success_vs_distinguishability(&ds, 0.75, 2, 4, 0, false).unwrap();
        assert_eq!(c.bins_csv().lines().count(), 3);
        assert_eq!(c.points_csv().lines().count(), 5);
        assert!(success_vs_distinguishability(&ds, 0.75, 1, 4, 0, false).is_err());
        assert!(success_vs_distinguishability(&ds, 0.75, 2, 1, 0, false).is_err());
    }
}
