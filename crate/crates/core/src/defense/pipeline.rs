//! End-to-end toy attack: synthetic generations per (prompt, model), an
//! attacker who attributes by nearest centroid in its own encoder's space,
//! and a defender who post-processes test images with a disjoint ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{defend, ensemble_embed, gaussian_noise_undo, select_positive_target, DefenseConfig, DifferentiableEncoder, ToyEncoder};
use crate::attribution::{rank_models, CentroidTable};
use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::store::{ModelId, PromptId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyAttackConfig {
    pub n_models: usize,
    pub n_prompts: usize,
    pub side: usize,
    /// Attacker reference generations per (prompt, model).
    pub refs_per_cell: usize,
    /// Defended test generations per (prompt, model).
    pub tests_per_cell: usize,
    /// Per-pixel half-range of the prompt's shared scene around mid-gray.
    pub scene_amplitude: f64,
    /// Std of the per-(prompt, model) pixel offset.
    pub model_amplitude: f64,
    /// Std of per-generation pixel noise.
    pub noise_std: f64,
    pub embed_dim: usize,
    pub attacker_seed: u64,
    pub ensemble_seeds: Vec<u64>,
    /// Budgets in 8-bit counts.
    pub epsilons: Vec<f64>,
    /// Gaussian undo strengths in `[0, 1]` pixel units.
    pub undo_sigmas: Vec<f64>,
    pub defense: DefenseConfig,
    pub seed: u64,
}

impl Default for ToyAttackConfig {
    fn default() -> Self {
        Self {
            n_models: 8,
            n_prompts: 8,
            side: 8,
            refs_per_cell: 10,
            tests_per_cell: 4,
            scene_amplitude: 0.2,
            model_amplitude: 0.01,
            noise_std: 0.01,
            embed_dim: 16,
            attacker_seed: 1_000,
            ensemble_seeds: vec![1, 2, 3, 4],
            epsilons: vec![0.0, 2.0, 4.0, 8.0],
            undo_sigmas: vec![1.0 / 255.0, 2.0 / 255.0],
            defense: DefenseConfig::default(),
            seed: 0,
        }
    }
}

impl ToyAttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_models < 2 {
            return Err(Error::param("n_models", "need at least 2 models"));
        }
        if self.n_prompts == 0 || self.refs_per_cell == 0 || self.tests_per_cell == 0 {
            return Err(Error::param("counts", "prompts, references and tests must be positive"));
        }
        if self.side == 0 {
            return Err(Error::param("side", "must be positive"));
        }
        for (name, v) in [
            ("scene_amplitude", self.scene_amplitude),
            ("model_amplitude", self.model_amplitude),
            ("noise_std", self.noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be finite and non-negative")));
            }
        }
        if self.ensemble_seeds.is_empty() {
            return Err(Error::param("ensemble_seeds", "ensemble needs at least one encoder"));
        }
        if self.ensemble_seeds.contains(&self.attacker_seed) {
            return Err(Error::param("attacker_seed", "attacker encoder must not be in the ensemble"));
        }
        if let Some(s) = self.undo_sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::param("undo_sigmas", format!("{s} must be finite and non-negative")));
        }
        for &epsilon in &self.epsilons {
            DefenseConfig {
                epsilon,
                ..self.defense.clone()
            }
            .validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyAttackRow {
    pub epsilon: f64,
    pub top1: f64,
    pub top3: f64,
    pub max_linf: f64,
    /// Every defended image satisfied `‖δ‖∞ ≤ ε/255`.
    pub budget_ok: bool,
    /// `(sigma, top1)` after Gaussian undo of the defended images.
    pub undo_top1: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyAttackReport {
    pub n_test: usize,
    pub rows: Vec<ToyAttackRow>,
}

struct Corpus {
    references: Vec<Vec<Vec<ImageGrid>>>,
    candidates: Vec<Vec<ImageGrid>>,
    tests: Vec<(PromptId, ModelId, ImageGrid)>,
}

fn build_corpus(cfg: &ToyAttackConfig) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pixels = cfg.side * cfg.side;
    let offset_dist = Normal::new(0.0, cfg.model_amplitude).map_err(|e| Error::param("model_amplitude", e.to_string()))?;
    let noise_dist = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::param("noise_std", e.to_string()))?;
    let mut references = Vec::with_capacity(cfg.n_prompts);
    let mut candidates = Vec::with_capacity(cfg.n_prompts);
    let mut tests = Vec::new();
    for p in 0..cfg.n_prompts {
        let scene: Vec<f64> = (0..pixels)
            .map(|_| 0.5 + cfg.scene_amplitude * rng.random_range(-1.0..=1.0))
            .collect();
        let mut prompt_refs = Vec::with_capacity(cfg.n_models);
        let mut prompt_cands = Vec::with_capacity(cfg.n_models);
        for m in 0..cfg.n_models {
            let base: Vec<f64> = scene.iter().map(|s| s + offset_dist.sample(&mut rng)).collect();
            let draw = |rng: &mut ChaCha8Rng| {
                let data = base.iter().map(|b| b + noise_dist.sample(rng)).collect();
                ImageGrid::from_clamped(cfg.side, cfg.side, data)
            };
            prompt_refs.push((0..cfg.refs_per_cell).map(|_| draw(&mut rng)).collect::<Result<Vec<_>>>()?);
            prompt_cands.push(draw(&mut rng)?);
            for _ in 0..cfg.tests_per_cell {
                tests.push((PromptId(p as u32), ModelId(m as u32), draw(&mut rng)?));
            }
        }
        references.push(prompt_refs);
        candidates.push(prompt_cands);
    }
    Ok(Corpus {
        references,
        candidates,
        tests,
    })
}

/// Attack accuracy before and after defense for each budget, and after
/// Gaussian undo of the defended images.
pub fn run_toy_attack(cfg: &ToyAttackConfig) -> Result<ToyAttackReport> {
    cfg.validate()?;
    let shape = (cfg.side, cfg.side);
    let attacker = ToyEncoder::new(cfg.attacker_seed, shape, cfg.embed_dim)?;
    let ensemble_owned = cfg
        .ensemble_seeds
        .iter()
        .map(|&s| ToyEncoder::new(s, shape, cfg.embed_dim))
        .collect::<Result<Vec<_>>>()?;
    let ensemble: Vec<&dyn DifferentiableEncoder> = ensemble_owned.iter().map(|e| e as &dyn DifferentiableEncoder).collect();
    let corpus = build_corpus(cfg)?;

    let tables = corpus
        .references
        .iter()
        .enumerate()
        .map(|(p, per_model)| {
            let groups = per_model
                .iter()
                .enumerate()
                .map(|(m, imgs)| {
                    let embs = imgs.iter().map(|i| attacker.embed(i)).collect::<Result<Vec<_>>>()?;
                    Ok((ModelId(m as u32), embs))
                })
                .collect::<Result<Vec<_>>>()?;
            CentroidTable::from_references(PromptId(p as u32), groups)
        })
        .collect::<Result<Vec<_>>>()?;

    let candidate_embs = corpus
        .candidates
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(m, img)| Ok((ModelId(m as u32), ensemble_embed(img, &ensemble)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let rank = |p: PromptId, m: ModelId, img: &ImageGrid| -> Result<usize> {
        let r = rank_models(&attacker.embed(img)?, &tables[p.0 as usize], false)?;
        Ok(r.rank_of(m).expect("model present in table"))
    };

    let n_test = corpus.tests.len();
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    for &epsilon in &cfg.epsilons {
        let dcfg = DefenseConfig {
            epsilon,
            ..cfg.defense.clone()
        };
        let outcomes = corpus
            .tests
            .par_iter()
            .enumerate()
            .map(|(idx, (p, m, img))| {
                let defended = if epsilon == 0.0 {
                    img.clone()
                } else {
                    let e_star = ensemble_embed(img, &ensemble)?;
                    let others: Vec<(ModelId, Vec<f64>)> = candidate_embs[p.0 as usize]
                        .iter()
                        .filter(|(cm, _)| cm != m)
                        .cloned()
                        .collect();
                    let pick = others[select_positive_target(&e_star, &others)?].0;
                    let positive = &corpus.candidates[p.0 as usize][pick.0 as usize];
                    defend(img, positive, &dcfg, &ensemble)?.image
                };
                let linf = defended.linf_distance(img)?;
                let r = rank(*p, *m, &defended)?;
                let undo = cfg
                    .undo_sigmas
                    .iter()
                    .enumerate()
                    .map(|(si, &sigma)| {
                        let seed = cfg.seed ^ ((si as u64) << 48) ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                        Ok(rank(*p, *m, &gaussian_noise_undo(&defended, sigma, seed)?)? == 1)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((r, linf, undo))
            })
            .collect::<Result<Vec<_>>>()?;

        let n = n_test as f64;
        let eps01 = dcfg.eps01();
        rows.push(ToyAttackRow {
            epsilon,
            top1: outcomes.iter().filter(|o| o.0 == 1).count() as f64 / n,
            top3: outcomes.iter().filter(|o| o.0 <= 3).count() as f64 / n,
            max_linf: outcomes.iter().map(|o| o.1).fold(0.0, f64::max),
            budget_ok: outcomes.iter().all(|o| o.1 <= eps01),
            undo_top1: cfg
                .undo_sigmas
                .iter()
                .enumerate()
                .map(|(si, &s)| (s, outcomes.iter().filter(|o| o.2[si]).count() as f64 / n))
                .collect(),
        });
    }
    Ok(ToyAttackReport { n_test, rows })
}
