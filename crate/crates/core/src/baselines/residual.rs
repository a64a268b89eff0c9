//! Noise-residual fingerprints: average `image − denoise(image)` over a
//! model's generations, then attribute a query by correlating its own
//! residual with each model's average.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Field, ImageGrid};
use crate::store::ModelId;

/// 3×3 median filter with edge-replicate padding.
pub fn denoise(img: &ImageGrid) -> Result<ImageGrid> {
    let (w, h) = img.shape();
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let mut out = Vec::with_capacity(w * h);
    let mut window = [0.0f64; 9];
    for y in 0..h {
        let rows = [y.saturating_sub(1), y, (y + 1).min(h - 1)];
        for x in 0..w {
            let cols = [x.saturating_sub(1), x, (x + 1).min(w - 1)];
            let mut i = 0;
            for &yy in &rows {
                for &xx in &cols {
                    window[i] = img.at(xx, yy);
                    i += 1;
                }
            }
            let (_, median, _) = window.select_nth_unstable_by(4, f64::total_cmp);
            out.push(*median);
        }
    }
    ImageGrid::new(w, h, out)
}

/// `img − denoise(img)`, unclamped.
pub fn residual(img: &ImageGrid) -> Result<Field> {
    let den = denoise(img)?;
    let data = img.pixels().iter().zip(den.pixels()).map(|(a, b)| a - b).collect();
    Field::new(img.width(), img.height(), data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualFingerprint {
    pub model: ModelId,
    pub residual: Field,
    pub n_images: usize,
}

/// Mean noise residual over `images`. Residuals are computed in parallel
/// and summed in input order.
pub fn marra_fingerprint(images: &[ImageGrid], model: ModelId) -> Result<ResidualFingerprint> {
    let first = images.first().ok_or(Error::Empty("fingerprint needs at least one image"))?;
    let shape = first.shape();
    if let Some(bad) = images.iter().find(|i| i.shape() != shape) {
        return Err(Error::ShapeMismatch {
            expected: shape,
            found: bad.shape(),
        });
    }
    let residuals = images.par_iter().map(residual).collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; shape.0 * shape.1];
    for r in &residuals {
        for (s, v) in sum.iter_mut().zip(&r.data) {
            *s += v;
        }
    }
    let n = images.len() as f64;
    Ok(ResidualFingerprint {
        model,
        residual: Field::new(shape.0, shape.1, sum.into_iter().map(|s| s / n).collect())?,
        n_images: images.len(),
    })
}

/// Pearson correlation of two equally sized samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 {
        return Err(Error::UndefinedCorrelation("first argument"));
    }
    if sbb <= 0.0 {
        return Err(Error::UndefinedCorrelation("second argument"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Fingerprints ranked by descending correlation with the query's residual;
/// equal correlations keep ascending model id.
pub fn marra_attribute(img: &ImageGrid, fingerprints: &[ResidualFingerprint]) -> Result<Vec<(ModelId, f64)>> {
    let r = residual(img)?;
    let mut out = Vec::with_capacity(fingerprints.len());
    for fp in fingerprints {
        if fp.residual.shape() != r.shape() {
            return Err(Error::ShapeMismatch {
                expected: fp.residual.shape(),
                found: r.shape(),
            });
        }
        let c = pearson(&r.data, &fp.residual.data).map_err(|e| match e {
            Error::UndefinedCorrelation("first argument") => Error::UndefinedCorrelation("query residual"),
            Error::UndefinedCorrelation(_) => Error::UndefinedCorrelation("fingerprint"),
            other => other,
        })?;
        out.push((fp.model, c));
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}
