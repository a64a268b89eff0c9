//! Synthetic embedding datasets with two geometry knobs: how far apart
//! per-(prompt, model) cluster centers sit, and how wide each cluster is.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{numbered_models, numbered_prompts, Dataset, EmbeddingRecord, ModelId, PromptId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub n_models: usize,
    pub n_prompts: usize,
    pub k_per_cell: usize,
    /// Expected distance between two cluster centers of the same prompt.
    pub inter_sep: f64,
    /// Per-coordinate standard deviation inside a cluster.
    pub intra_std: f64,
    pub rng_seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dim", self.dim),
            ("n_models", self.n_models),
            ("n_prompts", self.n_prompts),
            ("k_per_cell", self.k_per_cell),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        if !(self.inter_sep >= 0.0 && self.inter_sep.is_finite()) {
            return Err(Error::param("inter_sep", "must be finite and >= 0"));
        }
        if !(self.intra_std > 0.0 && self.intra_std.is_finite()) {
            return Err(Error::param("intra_std", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Mean distance between two independent uniform points on the unit sphere
/// in `R^dim`: `2^(d-1) Γ(d/2)^2 / (√π Γ(d - 1/2))`.
pub fn mean_chord_length(dim: usize) -> f64 {
    let d = dim as f64;
    let ln = (d - 1.0) * std::f64::consts::LN_2 + 2.0 * libm::lgamma(d / 2.0)
        - 0.5 * std::f64::consts::PI.ln()
        - libm::lgamma(d - 0.5);
    ln.exp()
}

/// Draws one dataset. Centers are uniform on a sphere whose radius makes
/// the expected pairwise center distance equal `inter_sep`; records are
/// center plus isotropic Gaussian noise. Bit-identical for equal configs.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let d = config.dim;
    let radius = config.inter_sep / mean_chord_length(d);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let mut records = Vec::with_capacity(config.n_prompts * config.n_models * config.k_per_cell);
    for p in 0..config.n_prompts {
        for m in 0..config.n_models {
            let center = random_direction(&mut rng, d)
                .into_iter()
                .map(|x| x * radius)
                .collect::<Vec<_>>();
            for j in 0..config.k_per_cell {
                let vector = center
                    .iter()
                    .map(|&c| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (c + config.intra_std * z) as f32
                    })
                    .collect();
                records.push(EmbeddingRecord {
                    model: ModelId(m as u32),
                    prompt: PromptId(p as u32),
                    seed_index: j as u32,
                    vector,
                });
            }
        }
    }

    Dataset::new(d, numbered_models(config.n_models), numbered_prompts(config.n_prompts), records)
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
