use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::json::to_canonical_string;
use crate::store::ModelId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub kind: String,
    /// SHA-256 of the dataset content.
    pub dataset_hash: String,
    pub n_models: usize,
    pub n_prompts: usize,
    pub dim: usize,
    pub k_ref: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Split seed of each repetition.
    pub seeds: Vec<u64>,
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ModelId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub mean: f64,
    /// Population std of the per-repetition accuracies.
    pub std_over_repetitions: f64,
    /// Population std of per-prompt accuracies, each averaged over
    /// repetitions.
    pub std_over_prompts: f64,
    pub per_repetition: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRestMetrics {
    pub target: ModelId,
    /// `full` or `limited`.
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub accuracy: f64,
    pub accuracy_std_over_repetitions: f64,
    pub auc: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub tpr_at_1pct: f64,
    pub tpr_at_5pct: f64,
}

/// Metric bundle of one experiment. Serializes to canonical JSON, so equal
/// inputs give byte-identical reports; wall-clock runtime is only included
/// when explicitly set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: Experiment,
    /// Keyed by `k` as a decimal string.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub topk_accuracy: BTreeMap<String, TopK>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub one_vs_rest: Vec<OneVsRestMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        to_canonical_string(self)
    }
}
