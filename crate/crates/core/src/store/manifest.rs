//! `manifest.json`: dataset layout pointing at one EMB1 file per cell.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::emb1::{decode_embeddings, write_embedding_file};
use super::{Dataset, EmbeddingRecord, ModelId, ModelInfo, PromptId, PromptInfo};
use crate::error::{Error, Result};
use crate::json::to_canonical_string;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dim: usize,
    pub models: Vec<String>,
    pub prompts: Vec<PromptEntry>,
    pub cells: Vec<CellEntry>,
    /// Set by producers that L2-normalize embeddings before writing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEntry {
    pub id: u32,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEntry {
    pub model: u32,
    pub prompt: u32,
    /// Relative to the manifest's directory.
    pub path: String,
}

/// Reads a manifest and every EMB1 file it references.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let models: Vec<ModelInfo> = manifest
        .models
        .iter()
        .enumerate()
        .map(|(i, name)| ModelInfo {
            id: ModelId(i as u32),
            name: name.clone(),
        })
        .collect();

    let mut prompts: Vec<PromptInfo> = manifest
        .prompts
        .iter()
        .map(|p| PromptInfo {
            id: PromptId(p.id),
            text: p.text.clone(),
        })
        .collect();
    prompts.sort_by_key(|p| p.id);

    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for cell in &manifest.cells {
        if !seen.insert((cell.prompt, cell.model)) {
            return Err(Error::Manifest(format!(
                "duplicate cell (model {}, prompt {})",
                cell.model, cell.prompt
            )));
        }
        let file = base.join(&cell.path);
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let (dim, rows) = decode_embeddings(&bytes)?;
        if dim != manifest.dim {
            return Err(Error::DimensionMismatch {
                expected: manifest.dim,
                found: dim,
            });
        }
        records.extend(rows.into_iter().enumerate().map(|(j, vector)| EmbeddingRecord {
            model: ModelId(cell.model),
            prompt: PromptId(cell.prompt),
            seed_index: j as u32,
            vector,
        }));
    }

    Dataset::new(manifest.dim, models, prompts, records)
}

/// Writes `dir/manifest.json` plus `dir/cells/p{prompt}_m{model}.emb`.
///
/// Records within a cell are written in ascending `seed_index` order.
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<std::path::PathBuf> {
    let dir = dir.as_ref();
    let cells_dir = dir.join("cells");
    fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;

    let mut cells = Vec::with_capacity(ds.cells().len());
    for &(prompt, model) in ds.cells().keys() {
        let mut recs: Vec<&EmbeddingRecord> = ds.cell(prompt, model).collect();
        recs.sort_by_key(|r| r.seed_index);
        let rows: Vec<&[f32]> = recs.iter().map(|r| r.vector.as_slice()).collect();
        let rel = format!("cells/p{}_m{}.emb", prompt.0, model.0);
        write_embedding_file(&rows, dir.join(&rel))?;
        cells.push(CellEntry {
            model: model.0,
            prompt: prompt.0,
            path: rel,
        });
    }

    let manifest = Manifest {
        dim: ds.dim(),
        models: ds.models().iter().map(|m| m.name.clone()).collect(),
        prompts: ds
            .prompts()
            .iter()
            .map(|p| PromptEntry {
                id: p.id.0,
                text: p.text.clone(),
            })
            .collect(),
        cells,
        normalized: None,
    };
    let out = dir.join("manifest.json");
    let text = to_canonical_string(&manifest)?;
    fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}
