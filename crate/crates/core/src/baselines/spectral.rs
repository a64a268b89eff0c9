//! Fourier-decay fingerprints: the azimuthally averaged power spectrum of an
//! image, and a power law `a · f^(−b)` fitted to its high-frequency band.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Field, ImageGrid};
use crate::store::ModelId;

fn fft2(width: usize, height: usize, data: &mut [Complex<f64>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = data[y * width + x];
        }
        col_fft.process(&mut col);
        for y in 0..height {
            data[y * width + x] = col[y];
        }
    }
}

/// Unnormalized 2-D DFT power `|F(u, v)|²`, same layout as the input.
pub fn power_spectrum_2d(img: &ImageGrid) -> Field {
    let (w, h) = img.shape();
    let mut buf: Vec<Complex<f64>> = img.pixels().iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(w, h, &mut buf, false);
    Field {
        width: w,
        height: h,
        data: buf.iter().map(|c| c.norm_sqr()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSpectrum {
    /// Power at zero frequency.
    pub dc: f64,
    /// `(frequency in cycles/pixel, mean power)` for radial bins `1..=side/2`.
    pub bins: Vec<(f64, f64)>,
}

/// Azimuthal average of the power spectrum of a square image. Frequency
/// index `(u, v)` (signed, in cycles per image) falls into bin
/// `round(√(u² + v²))`; bins `1..=⌊side/2⌋` are kept.
pub fn reduced_spectrum(img: &ImageGrid) -> Result<ReducedSpectrum> {
    let (w, h) = img.shape();
    if w != h {
        return Err(Error::NotSquare { width: w, height: h });
    }
    if w < 8 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 8,
        });
    }
    let n = w;
    let power = power_spectrum_2d(img);
    let n_bins = n / 2;
    let mut sums = vec![0.0; n_bins + 1];
    let mut counts = vec![0usize; n_bins + 1];
    let signed = |i: usize| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    for v in 0..n {
        for u in 0..n {
            let r = (signed(u).powi(2) + signed(v).powi(2)).sqrt().round() as usize;
            if r <= n_bins {
                sums[r] += power.data[v * n + u];
                counts[r] += 1;
            }
        }
    }
    let bins = (1..=n_bins)
        .map(|r| (r as f64 / n as f64, sums[r] / counts[r] as f64))
        .collect();
    Ok(ReducedSpectrum { dc: power.data[0], bins })
}

/// Half-open frequency band `(lo, hi]` in cycles/pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBand {
    pub lo: f64,
    pub hi: f64,
}

impl FitBand {
    pub const HIGH_OCTAVE: FitBand = FitBand { lo: 0.25, hi: 0.5 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi && hi <= 0.5) {
            return Err(Error::param("band", format!("need 0 <= lo < hi <= 0.5, got ({lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, f: f64) -> bool {
        f > self.lo && f <= self.hi
    }
}

impl Default for FitBand {
    fn default() -> Self {
        Self::HIGH_OCTAVE
    }
}

/// Least-squares line `ln p = ln a − b ln f` over the positive-power bins
/// inside `band`. Returns `(a, b)`.
pub fn fit_power_law(spectrum: &[(f64, f64)], band: FitBand) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = spectrum
        .iter()
        .filter(|(f, p)| band.contains(*f) && *f > 0.0 && *p > 0.0)
        .map(|(f, p)| (f.ln(), p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientBins(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok((intercept.exp(), -slope))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSignature {
    pub model: ModelId,
    /// Amplitude `a > 0`.
    pub a: f64,
    /// Decay exponent.
    pub b: f64,
    pub fit_band: FitBand,
}

/// Fits `(a, b)` to one image over `band`.
pub fn fit_image(img: &ImageGrid, band: FitBand) -> Result<(f64, f64)> {
    fit_power_law(&reduced_spectrum(img)?.bins, band)
}

/// Model signature: geometric mean of per-image `a`, arithmetic mean of `b`.
pub fn dzanic_signature(images: &[ImageGrid], model: ModelId, band: FitBand) -> Result<SpectralSignature> {
    if images.is_empty() {
        return Err(Error::Empty("signature needs at least one image"));
    }
    let (mut log_a, mut b) = (0.0, 0.0);
    for img in images {
        let (ai, bi) = fit_image(img, band)?;
        log_a += ai.ln();
        b += bi;
    }
    let n = images.len() as f64;
    Ok(SpectralSignature {
        model,
        a: (log_a / n).exp(),
        b: b / n,
        fit_band: band,
    })
}

/// Signatures ranked by ascending Euclidean distance to the query's
/// `(ln a, b)`; equal distances keep ascending model id.
pub fn dzanic_attribute(img: &ImageGrid, signatures: &[SpectralSignature]) -> Result<Vec<(ModelId, f64)>> {
    let band = signatures.first().ok_or(Error::Empty("no signatures"))?.fit_band;
    if signatures.iter().any(|s| s.fit_band != band) {
        return Err(Error::param("signatures", "fit bands differ"));
    }
    let (a, b) = fit_image(img, band)?;
    let mut out: Vec<(ModelId, f64)> = signatures
        .iter()
        .map(|s| (s.model, (a.ln() - s.a.ln()).hypot(b - s.b)))
        .collect();
    out.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    Ok(out)
}

/// Inverse 2-D DFT of `spectrum`, real part.
pub(crate) fn inverse_real(width: usize, height: usize, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
    fft2(width, height, &mut spectrum, true);
    let scale = (width * height) as f64;
    spectrum.into_iter().map(|c| c.re / scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::corpus::synthesize_power_law_image;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_square(rng: &mut ChaCha8Rng, n: usize) -> ImageGrid {
        ImageGrid::new(n, n, (0..n * n).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (w, h) = (6, 4);
        let img = ImageGrid::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap();
        let p = power_spectrum_2d(&img);
        for v in 0..h {
            for u in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let ang = -2.0 * std::f64::consts::PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                        acc += Complex::from_polar(img.at(x, y), ang);
                    }
                }
                assert!((acc.norm_sqr() - p.data[v * w + u]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_image_is_dc_only() {
        let img = ImageGrid::filled(16, 16, 0.4).unwrap();
        let s = reduced_spectrum(&img).unwrap();
        assert!((s.dc - (0.4 * 256.0f64).powi(2)).abs() < 1e-6);
        assert_eq!(s.bins.len(), 8);
        assert!(s.bins.iter().all(|(_, p)| p.abs() < 1e-9));
        assert!((s.bins[0].0 - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(s.bins[7].0, 0.5);
    }

    #[test]
    fn cosine_lands_in_its_bin() {
        let n = 32;
        let f = 5;
        let px: Vec<f64> = (0..n * n)
            .map(|i| 0.5 + 0.4 * (2.0 * std::f64::consts::PI * f as f64 * (i % n) as f64 / n as f64).cos())
            .collect();
        let s = reduced_spectrum(&ImageGrid::new(n, n, px).unwrap()).unwrap();
        let (argmax, _) = s
            .bins
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .unwrap();
        assert_eq!(argmax + 1, f);
        let total: f64 = s.bins.iter().map(|b| b.1).sum();
        assert!(s.bins[f - 1].1 > 0.999 * total);
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = random_square(&mut rng, 32);
        let p = power_spectrum_2d(&img);
        let lhs: f64 = p.data.iter().sum();
        let rhs = 1024.0 * img.pixels().iter().map(|x| x * x).sum::<f64>();
        assert!((lhs - rhs).abs() / rhs < 1e-6);
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 16;
        let img = random_square(&mut rng, n);
        let shifted: Vec<f64> = (0..n * n)
            .map(|i| {
                let (x, y) = (i % n, i / n);
                img.at((x + 5) % n, (y + 3) % n)
            })
            .collect();
        let a = reduced_spectrum(&img).unwrap();
        let b = reduced_spectrum(&ImageGrid::new(n, n, shifted).unwrap()).unwrap();
        for (x, y) in a.bins.iter().zip(&b.bins) {
            assert!((x.1 - y.1).abs() <= 1e-6 * x.1.max(1.0));
        }
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            reduced_spectrum(&ImageGrid::filled(16, 8, 0.0).unwrap()),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn exact_power_law_recovered() {
        let spec: Vec<(f64, f64)> = (1..=64).map(|r| r as f64 / 128.0).map(|f| (f, 2.0 * f.powf(-3.0))).collect();
        let (a, b) = fit_power_law(&spec, FitBand::HIGH_OCTAVE).unwrap();
        assert!((a - 2.0).abs() < 1e-6 && (b - 3.0).abs() < 1e-6);
        let flat: Vec<(f64, f64)> = spec.iter().map(|(f, _)| (*f, 7.0)).collect();
        let (a, b) = fit_power_law(&flat, FitBand::HIGH_OCTAVE).unwrap();
        assert!(b.abs() < 1e-9 && (a - 7.0).abs() < 1e-9);
    }

    #[test]
    fn fit_needs_three_positive_bins() {
        let spec = vec![(0.3, 1.0), (0.4, 0.0), (0.45, 2.0), (0.1, 3.0)];
        assert!(matches!(
            fit_power_law(&spec, FitBand::HIGH_OCTAVE),
            Err(Error::InsufficientBins(2))
        ));
        assert!(FitBand::new(0.3, 0.2).is_err());
        assert!(FitBand::new(0.1, 0.6).is_err());
    }

    #[test]
    fn synthesized_exponents_recovered() {
        for (beta, seed) in [(1.0, 10), (2.0, 11), (3.0, 12)] {
            let img = synthesize_power_law_image(128, beta, seed).unwrap();
            let (_, b) = fit_image(&img, FitBand::HIGH_OCTAVE).unwrap();
            assert!((b - beta).abs() / beta < 0.05, "beta {beta}: {b}");
        }
    }

    #[test]
    fn attribution_prefers_matching_profile() {
        let band = FitBand::HIGH_OCTAVE;
        let sigs: Vec<SpectralSignature> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(m, &beta)| {
                let imgs: Vec<ImageGrid> = (0..5)
                    .map(|s| synthesize_power_law_image(64, beta, 100 * m as u64 + s).unwrap())
                    .collect();
                dzanic_signature(&imgs, ModelId(m as u32), band).unwrap()
            })
            .collect();
        let query = synthesize_power_law_image(64, 2.0, 999).unwrap();
        let ranked = dzanic_attribute(&query, &sigs).unwrap();
        assert_eq!(ranked[0].0, ModelId(1));
        assert!(ranked.iter().all(|(_, d)| *d >= 0.0));
    }

    #[test]
    fn identical_signatures_tie_by_id() {
        let img = synthesize_power_law_image(32, 2.0, 1).unwrap();
        let (a, b) = fit_image(&img, FitBand::HIGH_OCTAVE).unwrap();
        let sig = |m| SpectralSignature {
            model: ModelId(m),
            a,
            b,
            fit_band: FitBand::HIGH_OCTAVE,
        };
        let ranked = dzanic_attribute(&img, &[sig(4), sig(2)]).unwrap();
        assert_eq!(ranked[0], (ModelId(2), 0.0));
        assert_eq!(ranked[1], (ModelId(4), 0.0));
    }
}
