//! Adversarial post-processing: nudge an image's embedding toward another
//! model's generation under an `l∞` pixel budget, so that centroid
//! attribution mislabels it. Also the Gaussian-noise undo attack.

mod encoder;
mod loss;
mod pipeline;

pub use encoder::{DifferentiableEncoder, ToyEncoder};
pub use loss::{contrastive_loss, cosine_similarity};
pub use pipeline::{run_toy_attack, ToyAttackConfig, ToyAttackReport, ToyAttackRow};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::store::ModelId;

/// Index of the candidate least similar to `e_star`; ties go to the
/// smaller model id.
pub fn select_positive_target(e_star: &[f64], candidates: &[(ModelId, Vec<f64>)]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("no positive candidates"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (model, emb)) in candidates.iter().enumerate() {
        let s = cosine_similarity(e_star, emb)?;
        let better = match best {
            None => true,
            Some((j, bs)) => s < bs || (s == bs && *model < candidates[j].0),
        };
        if better {
            best = Some((i, s));
        }
    }
    Ok(best.unwrap().0)
}

/// Clamps `perturbed` into `[original − eps01, original + eps01] ∩ [0, 1]`
/// per pixel. The bound holds exactly in floating point: the box edges are
/// pulled inward until `|x − original| ≤ eps01` evaluates true. NaN pixels
/// fall back to the original.
pub fn project_linf(original: &ImageGrid, perturbed: &[f64], eps01: f64) -> Result<ImageGrid> {
    if !(eps01 >= 0.0 && eps01.is_finite()) {
        return Err(Error::param("eps01", format!("{eps01} must be finite and non-negative")));
    }
    if perturbed.len() != original.pixels().len() {
        return Err(Error::DimensionMismatch {
            expected: original.pixels().len(),
            found: perturbed.len(),
        });
    }
    let data = original
        .pixels()
        .iter()
        .zip(perturbed)
        .map(|(&o, &p)| {
            let mut lo = (o - eps01).max(0.0);
            while o - lo > eps01 {
                lo = lo.next_up();
            }
            let mut hi = (o + eps01).min(1.0);
            while hi - o > eps01 {
                hi = hi.next_down();
            }
            if p.is_nan() {
                o
            } else {
                p.clamp(lo, hi)
            }
        })
        .collect();
    ImageGrid::new(original.width(), original.height(), data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseConfig {
    /// `l∞` budget in 8-bit counts; applied as `epsilon / 255`.
    pub epsilon: f64,
    pub eta: f64,
    pub tau_temp: f64,
    pub iterations: usize,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            epsilon: 4.0,
            eta: 0.1,
            tau_temp: 0.1,
            iterations: 100,
        }
    }
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon <= 255.0) {
            return Err(Error::param("epsilon", format!("{} outside [0, 255]", self.epsilon)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", format!("{} must be positive", self.eta)));
        }
        if !(self.tau_temp > 0.0 && self.tau_temp.is_finite()) {
            return Err(Error::param("tau_temp", format!("{} must be positive", self.tau_temp)));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn eps01(&self) -> f64 {
        self.epsilon / 255.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseResult {
    pub image: ImageGrid,
    /// Mean ensemble loss at the returned image.
    pub final_loss: f64,
    /// Loss before each of the update steps.
    pub loss_trace: Vec<f64>,
    pub linf: f64,
}

struct Anchor<'a> {
    encoder: &'a dyn DifferentiableEncoder,
    e_pos: Vec<f64>,
    e_neg: Vec<f64>,
}

fn ensemble_loss(anchors: &[Anchor<'_>], pixels: &[f64], tau_temp: f64, want_grad: bool) -> Result<(f64, Vec<f64>)> {
    let k = anchors.len() as f64;
    let mut total = 0.0;
    let mut grad = if want_grad { vec![0.0; pixels.len()] } else { Vec::new() };
    for a in anchors {
        let z = a.encoder.forward(pixels)?;
        let (l, gz) = contrastive_loss(&z, &a.e_pos, &a.e_neg, tau_temp)?;
        total += l / k;
        if want_grad {
            for (g, v) in grad.iter_mut().zip(a.encoder.backward(pixels, &gz)?) {
                *g += v / k;
            }
        }
    }
    Ok((total, grad))
}

/// Runs projected gradient descent on the mean contrastive loss of the
/// ensemble, pulling `original` toward `positive` and away from itself.
pub fn defend(
    original: &ImageGrid,
    positive: &ImageGrid,
    config: &DefenseConfig,
    encoders: &[&dyn DifferentiableEncoder],
) -> Result<DefenseResult> {
    config.validate()?;
    if encoders.is_empty() {
        return Err(Error::Empty("encoder ensemble"));
    }
    if positive.shape() != original.shape() {
        return Err(Error::ShapeMismatch {
            expected: original.shape(),
            found: positive.shape(),
        });
    }
    let anchors = encoders
        .iter()
        .map(|&encoder| {
            Ok(Anchor {
                encoder,
                e_pos: encoder.embed(positive)?,
                e_neg: encoder.embed(original)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let eps01 = config.eps01();
    let mut current = original.clone();
    let mut trace = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let (loss, grad) = ensemble_loss(&anchors, current.pixels(), config.tau_temp, true)?;
        trace.push(loss);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration, trace });
        }
        let stepped: Vec<f64> = current
            .pixels()
            .iter()
            .zip(&grad)
            .map(|(x, g)| x - config.eta * g)
            .collect();
        current = project_linf(original, &stepped, eps01)?;
    }
    let (final_loss, _) = ensemble_loss(&anchors, current.pixels(), config.tau_temp, false)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: config.iterations,
            trace,
        });
    }
    let linf = current.linf_distance(original)?;
    Ok(DefenseResult {
        image: current,
        final_loss,
        loss_trace: trace,
        linf,
    })
}

/// Adds i.i.d. `N(0, sigma²)` noise per pixel and clamps to `[0, 1]`.
pub fn gaussian_noise_undo(img: &ImageGrid, sigma: f64, seed: u64) -> Result<ImageGrid> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("{sigma} must be finite and non-negative")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param("sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img.pixels().iter().map(|v| v + normal.sample(&mut rng)).collect();
    ImageGrid::from_clamped(img.width(), img.height(), data)
}

/// Concatenated per-encoder embeddings scaled by `1/√K`. The result has
/// unit norm and its cosine with another ensemble embedding is the mean
/// per-encoder cosine.
pub fn ensemble_embed(img: &ImageGrid, encoders: &[&dyn DifferentiableEncoder]) -> Result<Vec<f64>> {
    if encoders.is_empty() {
        return Err(Error::Empty("encoder ensemble"));
    }
    let scale = 1.0 / (encoders.len() as f64).sqrt();
    let mut out = Vec::new();
    for e in encoders {
        out.extend(e.embed(img)?.into_iter().map(|v| v * scale));
    }
    Ok(out)
}

/// Writes a loss trace as `iteration,loss` CSV.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}
