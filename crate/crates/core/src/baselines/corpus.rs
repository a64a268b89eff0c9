//! Synthetic image corpora with known ground truth for the fingerprint
//! baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::spectral::inverse_real;
use crate::error::{Error, Result};
use crate::image::{Field, ImageGrid};
use crate::store::ModelId;

/// Each model stamps a fixed white-noise pattern onto every image it
/// generates. Images are `0.5 + smooth content + pattern + noise`, clamped
/// to `[0, 1]`. `snr` is the ratio of pattern std to noise std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPatternConfig {
    pub n_models: usize,
    pub side: usize,
    pub snr: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub noise_std: f64,
    /// Amplitude of the per-image low-frequency sinusoid.
    pub content_amplitude: f64,
    pub seed: u64,
}

impl Default for PlantedPatternConfig {
    fn default() -> Self {
        Self {
            n_models: 22,
            side: 32,
            snr: 0.2,
            n_train: 100,
            n_test: 10,
            noise_std: 0.1,
            content_amplitude: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedPatternCorpus {
    pub patterns: Vec<Field>,
    pub train: Vec<(ModelId, ImageGrid)>,
    pub test: Vec<(ModelId, ImageGrid)>,
}

impl PlantedPatternCorpus {
    pub fn train_images(&self, model: ModelId) -> Vec<ImageGrid> {
        self.train
            .iter()
            .filter(|(m, _)| *m == model)
            .map(|(_, i)| i.clone())
            .collect()
    }
}

pub fn planted_pattern_corpus(cfg: &PlantedPatternConfig) -> Result<PlantedPatternCorpus> {
    if cfg.n_models == 0 || cfg.side < 3 {
        return Err(Error::param("config", "need at least one model and side >= 3"));
    }
    if !(cfg.snr >= 0.0 && cfg.noise_std >= 0.0) {
        return Err(Error::param("config", "snr and noise_std must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.side * cfg.side;
    let pattern_std = cfg.snr * cfg.noise_std;
    let patterns: Vec<Field> = (0..cfg.n_models)
        .map(|_| {
            let data = (0..n)
                .map(|_| pattern_std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Field::new(cfg.side, cfg.side, data)
        })
        .collect::<Result<_>>()?;

    let draw = |rng: &mut ChaCha8Rng, pattern: &Field| -> Result<ImageGrid> {
        let fx: f64 = rng.random_range(0.0..2.0);
        let fy: f64 = rng.random_range(0.0..2.0);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let s = cfg.side as f64;
        let data = (0..n)
            .map(|i| {
                let (x, y) = ((i % cfg.side) as f64, (i / cfg.side) as f64);
                let content = cfg.content_amplitude * (std::f64::consts::TAU * (fx * x + fy * y) / s + phase).sin();
                let noise: f64 = StandardNormal.sample(&mut *rng);
                0.5 + content + pattern.data[i] + cfg.noise_std * noise
            })
            .collect();
        ImageGrid::from_clamped(cfg.side, cfg.side, data)
    };

    let mut train = Vec::with_capacity(cfg.n_models * cfg.n_train);
    let mut test = Vec::with_capacity(cfg.n_models * cfg.n_test);
    for (m, p) in patterns.iter().enumerate() {
        for _ in 0..cfg.n_train {
            train.push((ModelId(m as u32), draw(&mut rng, p)?));
        }
        for _ in 0..cfg.n_test {
            test.push((ModelId(m as u32), draw(&mut rng, p)?));
        }
    }
    Ok(PlantedPatternCorpus { patterns, train, test })
}

/// Square image whose power spectrum is exactly `|f|^(−beta)` up to a
/// constant: magnitudes `|f|^(−beta/2)` with uniformly random phases,
/// Hermitian-symmetric so the inverse transform is real, then min-max
/// scaled into `[0, 1]`.
pub fn synthesize_power_law_image(side: usize, beta: f64, seed: u64) -> Result<ImageGrid> {
    if side < 8 {
        return Err(Error::ImageTooSmall {
            width: side,
            height: side,
            min: 8,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signed = |i: usize| if i <= side / 2 { i as f64 } else { i as f64 - side as f64 };
    let mut spec = vec![Complex::new(0.0, 0.0); side * side];
    for v in 0..side {
        for u in 0..side {
            let (pu, pv) = ((side - u) % side, (side - v) % side);
            let (idx, partner) = (v * side + u, pv * side + pu);
            if partner < idx || (u == 0 && v == 0) {
                continue;
            }
            let r = (signed(u).powi(2) + signed(v).powi(2)).sqrt();
            let mag = r.powf(-beta / 2.0);
            if partner == idx {
                // self-conjugate frequency: coefficient must be real
                spec[idx] = Complex::new(if rng.random::<bool>() { mag } else { -mag }, 0.0);
            } else {
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                spec[idx] = Complex::from_polar(mag, phase);
                spec[partner] = spec[idx].conj();
            }
        }
    }
    let raw = inverse_real(side, side, spec);
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi <= lo {
        return Err(Error::param("beta", "synthesized image is constant"));
    }
    ImageGrid::from_clamped(side, side, raw.into_iter().map(|v| (v - lo) / (hi - lo)).collect())
}
