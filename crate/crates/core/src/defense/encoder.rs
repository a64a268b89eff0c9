use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// An image encoder with a vector-Jacobian product.
///
/// Implementations are shared read-only across concurrent defenses.
pub trait DifferentiableEncoder: Send + Sync {
    fn name(&self) -> &str;

    fn output_dim(&self) -> usize;

    /// `(width, height)` of accepted inputs.
    fn input_shape(&self) -> (usize, usize);

    /// Embeds row-major pixels. Outputs have unit L2 norm.
    fn forward(&self, pixels: &[f64]) -> Result<Vec<f64>>;

    /// Gradient of `⟨cotangent, forward(pixels)⟩` with respect to `pixels`.
    fn backward(&self, pixels: &[f64], cotangent: &[f64]) -> Result<Vec<f64>>;

    fn embed(&self, img: &ImageGrid) -> Result<Vec<f64>> {
        if img.shape() != self.input_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.input_shape(),
                found: img.shape(),
            });
        }
        self.forward(img.pixels())
    }
}

/// `normalize(tanh(W · x))` with a fixed Gaussian `W`.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    name: String,
    shape: (usize, usize),
    m: usize,
    /// Row-major `m × pixels`.
    weights: Vec<f64>,
}

impl ToyEncoder {
    /// Draws `W` with i.i.d. entries of standard deviation `1/√(m · pixels)`
    /// from `seed`.
    pub fn new(seed: u64, input_shape: (usize, usize), m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::param("m", "output dimension must be at least 2"));
        }
        let pixels = input_shape.0 * input_shape.1;
        if pixels == 0 {
            return Err(Error::param("input_shape", "must be non-empty"));
        }
        let std = 1.0 / ((m * pixels) as f64).sqrt();
        let normal = Normal::new(0.0, std).map_err(|e| Error::param("m", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..m * pixels).map(|_| normal.sample(&mut rng)).collect();
        Ok(Self {
            name: format!("toy-{seed}"),
            shape: input_shape,
            m,
            weights,
        })
    }

    fn pixels(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    fn check(&self, pixels: &[f64]) -> Result<()> {
        if pixels.len() != self.pixels() {
            return Err(Error::DimensionMismatch {
                expected: self.pixels(),
                found: pixels.len(),
            });
        }
        Ok(())
    }

    /// `tanh(W x)` and its norm.
    fn activations(&self, pixels: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check(pixels)?;
        let p = self.pixels();
        let act: Vec<f64> = self
            .weights
            .chunks_exact(p)
            .map(|row| row.iter().zip(pixels).map(|(w, x)| w * x).sum::<f64>().tanh())
            .collect();
        let norm = act.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok((act, norm))
    }
}

impl DifferentiableEncoder for ToyEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_dim(&self) -> usize {
        self.m
    }

    fn input_shape(&self) -> (usize, usize) {
        self.shape
    }

    fn forward(&self, pixels: &[f64]) -> Result<Vec<f64>> {
        let (act, norm) = self.activations(pixels)?;
        Ok(act.into_iter().map(|a| a / norm).collect())
    }

    fn backward(&self, pixels: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        if cotangent.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: cotangent.len(),
            });
        }
        let (act, norm) = self.activations(pixels)?;
        // z = a/|a|:  dL/da = (g − (g·z) z) / |a|
        let gz: f64 = cotangent.iter().zip(&act).map(|(g, a)| g * a / norm).sum();
        let p = self.pixels();
        let mut grad = vec![0.0; p];
        for ((row, g), a) in self.weights.chunks_exact(p).zip(cotangent).zip(&act) {
            let z = a / norm;
            let d_pre = (g - gz * z) / norm * (1.0 - a * a);
            for (out, w) in grad.iter_mut().zip(row) {
                *out += d_pre * w;
            }
        }
        Ok(grad)
    }
}
