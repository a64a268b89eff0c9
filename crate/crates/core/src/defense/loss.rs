use crate::error::{Error, Result};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `u·v / (‖u‖‖v‖)`, clamped to `[−1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine similarity and its gradient with respect to `z`.
fn cosine_with_grad(z: &[f64], e: &[f64]) -> Result<(f64, Vec<f64>)> {
    let s = cosine_similarity(z, e)?;
    let (nz, ne) = (norm(z), norm(e));
    let dot: f64 = z.iter().zip(e).map(|(a, b)| a * b).sum();
    let grad = z
        .iter()
        .zip(e)
        .map(|(zi, ei)| ei / (nz * ne) - dot * zi / (nz.powi(3) * ne))
        .collect();
    Ok((s, grad))
}

/// Two-way contrastive loss `−log p⁺ + log p⁻`, where `p±` is the softmax
/// of `S(z, e±)/τ` over the positive and negative. Returns the loss and
/// `∂loss/∂z`.
pub fn contrastive_loss(z: &[f64], e_pos: &[f64], e_neg: &[f64], tau_temp: f64) -> Result<(f64, Vec<f64>)> {
    if !(tau_temp > 0.0 && tau_temp.is_finite()) {
        return Err(Error::param("tau_temp", format!("{tau_temp} must be positive")));
    }
    let (s_pos, g_pos) = cosine_with_grad(z, e_pos)?;
    let (s_neg, g_neg) = cosine_with_grad(z, e_neg)?;
    let (l_pos, l_neg) = (s_pos / tau_temp, s_neg / tau_temp);
    let m = l_pos.max(l_neg);
    let log_z = m + ((l_pos - m).exp() + (l_neg - m).exp()).ln();
    let loss = -(l_pos - log_z) + (l_neg - log_z);
    // the partition terms cancel: ∂loss/∂s⁺ = −1/τ, ∂loss/∂s⁻ = 1/τ
    let grad = g_pos
        .iter()
        .zip(&g_neg)
        .map(|(gp, gn)| (gn - gp) / tau_temp)
        .collect();
    Ok((loss, grad))
}
