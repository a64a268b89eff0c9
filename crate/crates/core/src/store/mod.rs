//! Embedding datasets: identifiers, records, the EMB1 interchange format,
//! JSON manifests, the synthetic cluster generator and reference/holdout
//! splitting.

mod emb1;
mod manifest;
mod split;
mod synth;
mod vector;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use emb1::{decode_embeddings, encode_embeddings, read_embedding_file, write_embedding_file};
pub use manifest::{load_manifest, save_dataset, CellEntry, Manifest, PromptEntry};
pub use split::split_reference_holdout;
pub use synth::{generate_synthetic, mean_chord_length, SynthConfig};
pub use vector::{euclidean, l2_normalize, squared_euclidean};

/// Dense handle of a participating model (`0..n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub u32);

/// Dense handle of a prompt (`0..p`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptId(pub u32);

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: ModelId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInfo {
    pub id: PromptId,
    /// May be empty for synthetic data.
    pub text: String,
}

/// One image's embedding tagged with its generating model, prompt and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub model: ModelId,
    pub prompt: PromptId,
    pub seed_index: u32,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn vector_f64(&self) -> Vec<f64> {
        self.vector.iter().map(|&x| f64::from(x)).collect()
    }
}

/// An immutable collection of embedding records grouped into
/// (prompt, model) cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    models: Vec<ModelInfo>,
    prompts: Vec<PromptInfo>,
    records: Vec<EmbeddingRecord>,
    cells: BTreeMap<(PromptId, ModelId), Vec<usize>>,
}

impl Dataset {
    /// Validates and indexes a dataset.
    ///
    /// Model and prompt ids must be dense (`models[i].id == i`), names
    /// unique, and every record must reference a declared model and prompt,
    /// carry `dim` finite components.
    pub fn new(
        dim: usize,
        models: Vec<ModelInfo>,
        prompts: Vec<PromptInfo>,
        records: Vec<EmbeddingRecord>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        for (i, m) in models.iter().enumerate() {
            if m.id.0 as usize != i {
                return Err(Error::param("models", format!("ids must be dense, found {} at {i}", m.id)));
            }
        }
        let mut names: Vec<&str> = models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("models", "names must be unique"));
        }
        for (i, p) in prompts.iter().enumerate() {
            if p.id.0 as usize != i {
                return Err(Error::param("prompts", format!("ids must be dense, found {} at {i}", p.id)));
            }
        }

        let mut cells: BTreeMap<(PromptId, ModelId), Vec<usize>> = BTreeMap::new();
        for (row, rec) in records.iter().enumerate() {
            if rec.model.0 as usize >= models.len() {
                return Err(Error::UnknownModel(rec.model.0));
            }
            if rec.prompt.0 as usize >= prompts.len() {
                return Err(Error::UnknownPrompt(rec.prompt.0));
            }
            if rec.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: rec.vector.len(),
                });
            }
            if let Some(col) = rec.vector.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row, col });
            }
            cells.entry((rec.prompt, rec.model)).or_default().push(row);
        }

        Ok(Self {
            dim,
            models,
            prompts,
            records,
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn models(&self) -> &[ModelInfo] {
        &self.models
    }

    pub fn prompts(&self) -> &[PromptInfo] {
        &self.prompts
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn model_ids(&self) -> impl Iterator<Item = ModelId> + '_ {
        self.models.iter().map(|m| m.id)
    }

    pub fn prompt_ids(&self) -> impl Iterator<Item = PromptId> + '_ {
        self.prompts.iter().map(|p| p.id)
    }

    /// All (prompt, model) cells with their record indices, in key order.
    pub fn cells(&self) -> &BTreeMap<(PromptId, ModelId), Vec<usize>> {
        &self.cells
    }

    /// Records of one cell, in insertion order. Empty if the cell is absent.
    pub fn cell(&self, prompt: PromptId, model: ModelId) -> impl Iterator<Item = &EmbeddingRecord> + '_ {
        self.cells
            .get(&(prompt, model))
            .into_iter()
            .flatten()
            .map(move |&i| &self.records[i])
    }

    /// Vectors of one cell promoted to `f64`.
    pub fn cell_vectors(&self, prompt: PromptId, model: ModelId) -> Vec<Vec<f64>> {
        self.cell(prompt, model).map(EmbeddingRecord::vector_f64).collect()
    }

    /// Every record belonging to `prompt`, ordered by model then insertion.
    pub fn prompt_records(&self, prompt: PromptId) -> impl Iterator<Item = &EmbeddingRecord> + '_ {
        self.cells
            .range((prompt, ModelId(0))..=(prompt, ModelId(u32::MAX)))
            .flat_map(move |(_, rows)| rows.iter().map(move |&i| &self.records[i]))
    }

    /// A copy with every vector scaled to unit L2 norm.
    pub fn normalized(&self) -> Result<Self> {
        let records = self
            .records
            .iter()
            .map(|r| {
                let v = l2_normalize(&r.vector_f64())?;
                Ok(EmbeddingRecord {
                    vector: v.into_iter().map(|x| x as f32).collect(),
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.dim, self.models.clone(), self.prompts.clone(), records)
    }

    /// SHA-256 over a canonical byte encoding of the dataset contents.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for m in &self.models {
            h.update(m.id.0.to_le_bytes());
            h.update((m.name.len() as u64).to_le_bytes());
            h.update(m.name.as_bytes());
        }
        for p in &self.prompts {
            h.update(p.id.0.to_le_bytes());
            h.update((p.text.len() as u64).to_le_bytes());
            h.update(p.text.as_bytes());
        }
        for r in &self.records {
            h.update(r.model.0.to_le_bytes());
            h.update(r.prompt.0.to_le_bytes());
            h.update(r.seed_index.to_le_bytes());
            for x in &r.vector {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Model table `model-0 .. model-{n-1}`.
pub fn numbered_models(n: usize) -> Vec<ModelInfo> {
    (0..n)
        .map(|i| ModelInfo {
            id: ModelId(i as u32),
            name: format!("model-{i}"),
        })
        .collect()
}

/// Prompt table with empty texts.
pub fn numbered_prompts(n: usize) -> Vec<PromptInfo> {
    (0..n)
        .map(|i| PromptInfo {
            id: PromptId(i as u32),
            text: String::new(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(model: u32, prompt: u32, v: Vec<f32>) -> EmbeddingRecord {
        EmbeddingRecord {
            model: ModelId(model),
            prompt: PromptId(prompt),
            seed_index: 0,
            vector: v,
        }
    }

    #[test]
    fn rejects_sparse_model_ids() {
        let models = vec![ModelInfo {
            id: ModelId(1),
            name: "a".into(),
        }];
        assert!(Dataset::new(2, models, numbered_prompts(1), vec![]).is_err());
    }

    #[test]
    fn rejects_duplicate_names() {
        let mut models = numbered_models(2);
        models[1].name = models[0].name.clone();
        assert!(Dataset::new(2, models, numbered_prompts(1), vec![]).is_err());
    }

    #[test]
    fn rejects_non_finite_and_wrong_dim() {
        let r = Dataset::new(2, numbered_models(1), numbered_prompts(1), vec![rec(0, 0, vec![1.0, f32::NAN])]);
        assert!(matches!(r, Err(Error::NonFinite { row: 0, col: 1 })));
        let r = Dataset::new(2, numbered_models(1), numbered_prompts(1), vec![rec(0, 0, vec![1.0])]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn groups_cells_and_prompt_records() {
        let ds = Dataset::new(
            1,
            numbered_models(2),
            numbered_prompts(2),
            vec![
                rec(1, 0, vec![1.0]),
                rec(0, 1, vec![2.0]),
                rec(0, 0, vec![3.0]),
                rec(1, 0, vec![4.0]),
            ],
        )
        .unwrap();
        assert_eq!(ds.cells().len(), 3);
        let p0: Vec<f32> = ds.prompt_records(PromptId(0)).map(|r| r.vector[0]).collect();
        assert_eq!(p0, vec![3.0, 1.0, 4.0]);
        assert_eq!(ds.cell(PromptId(1), ModelId(1)).count(), 0);
    }

    #[test]
    fn hash_changes_with_content() {
        let a = Dataset::new(1, numbered_models(1), numbered_prompts(1), vec![rec(0, 0, vec![1.0])]).unwrap();
        let b = Dataset::new(1, numbered_models(1), numbered_prompts(1), vec![rec(0, 0, vec![1.5])]).unwrap();
        assert_eq!(a.content_hash(), a.clone().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
