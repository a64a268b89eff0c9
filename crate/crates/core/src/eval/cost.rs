use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::ModelId;

/// Prices the reference generations an attacker must buy per target image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Price per generated image.
    pub prices: BTreeMap<ModelId, f64>,
    /// Generations bought per model.
    pub images_per_model: u64,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if self.images_per_model == 0 {
            return Err(Error::param("images_per_model", "must be at least 1"));
        }
        if let Some((m, p)) = self.prices.iter().find(|(_, p)| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::param("prices", format!("model {m} has invalid price {p}")));
        }
        Ok(())
    }
}

/// `images_per_model × Σ prices`.
pub fn attack_cost(cm: &CostModel) -> Result<f64> {
    cm.validate()?;
    Ok(cm.images_per_model as f64 * cm.prices.values().sum::<f64>())
}
