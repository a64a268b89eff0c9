use std::fs;

use lbaudit::attribution::{build_centroid_table, classify};
use lbaudit::distinguishability::rank_prompts;
use lbaudit::eval::{run_multiclass, run_one_vs_rest_full, RunConfig};
use lbaudit::store::{encode_embeddings, generate_synthetic, load_manifest, save_dataset, split_reference_holdout};
use lbaudit::{Error, ModelId, PromptId, SynthConfig};

fn config() -> SynthConfig {
    SynthConfig {
        dim: 12,
        n_models: 5,
        n_prompts: 3,
        k_per_cell: 9,
        inter_sep: 6.0,
        intra_std: 1.0,
        rng_seed: 17,
    }
}

#[test]
fn saved_dataset_loads_identically() {
    let ds = generate_synthetic(&config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&ds, dir.path()).unwrap();
    let back = load_manifest(&manifest).unwrap();
    assert_eq!(back.content_hash(), ds.content_hash());

    let cfg = RunConfig {
        k_ref: 4,
        repetitions: 2,
        seed: 1,
        normalize: false,
    };
    assert_eq!(
        run_multiclass(&ds, &cfg).unwrap().to_json().unwrap(),
        run_multiclass(&back, &cfg).unwrap().to_json().unwrap()
    );
}

#[test]
fn hand_written_manifest_with_normalized_flag() {
    let dir = tempfile::tempdir().unwrap();
    let rows_a: Vec<Vec<f32>> = vec![vec![1.0, 0.0], vec![0.8, 0.6], vec![0.6, 0.8]];
    let rows_b: Vec<Vec<f32>> = vec![vec![-1.0, 0.0], vec![-0.8, -0.6], vec![-0.6, -0.8]];
    fs::create_dir(dir.path().join("e")).unwrap();
    fs::write(dir.path().join("e/a.emb"), encode_embeddings(&rows_a).unwrap()).unwrap();
    fs::write(dir.path().join("e/b.emb"), encode_embeddings(&rows_b).unwrap()).unwrap();
    let manifest = r#"{
        "dim": 2,
        "models": ["alpha", "beta"],
        "prompts": [{"id": 0, "text": "a red bicycle"}],
        "cells": [
            {"model": 0, "prompt": 0, "path": "e/a.emb"},
            {"model": 1, "prompt": 0, "path": "e/b.emb"}
        ],
        "normalized": true
    }"#;
    let path = dir.path().join("manifest.json");
    fs::write(&path, manifest).unwrap();
    let ds = load_manifest(&path).unwrap();
    assert_eq!(ds.records().len(), 6);
    assert_eq!(ds.models()[1].name, "beta");

    let table = build_centroid_table(&ds, PromptId(0)).unwrap();
    assert_eq!(classify(&[0.9, 0.1], &table, true).unwrap(), ModelId(0));
    assert_eq!(classify(&[-5.0, -1.0], &table, true).unwrap(), ModelId(1));
    let ranking = rank_prompts(&ds, 0.75, true).unwrap();
    assert_eq!(ranking.scores[0].d, 1.0);
}

#[test]
fn manifest_errors_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    let missing = load_manifest(dir.path().join("nope.json")).unwrap_err();
    assert!(missing.is_io());

    let path = dir.path().join("manifest.json");
    fs::write(
        &path,
        r#"{"dim": 3, "models": ["a"], "prompts": [{"id": 0, "text": ""}],
            "cells": [{"model": 0, "prompt": 0, "path": "gone.emb"}]}"#,
    )
    .unwrap();
    let err = load_manifest(&path).unwrap_err();
    assert!(err.is_io());
    assert!(err.to_string().contains("gone.emb"));

    fs::write(dir.path().join("x.emb"), encode_embeddings(&[vec![1.0f32, 2.0]]).unwrap()).unwrap();
    fs::write(
        &path,
        r#"{"dim": 3, "models": ["a"], "prompts": [{"id": 0, "text": ""}],
            "cells": [{"model": 0, "prompt": 0, "path": "x.emb"}]}"#,
    )
    .unwrap();
    let err = load_manifest(&path).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 2 }));
    assert!(!err.is_io());
}

#[test]
fn splits_partition_each_cell() {
    let ds = generate_synthetic(&config()).unwrap();
    let (reference, holdout) = split_reference_holdout(&ds, 4, 3).unwrap();
    for (&(p, m), idx) in ds.cells() {
        assert_eq!(reference.cell(p, m).count(), 4);
        assert_eq!(holdout.cell(p, m).count(), idx.len() - 4);
        let mut seeds: Vec<u32> = reference.cell(p, m).chain(holdout.cell(p, m)).map(|r| r.seed_index).collect();
        seeds.sort();
        assert_eq!(seeds, (0..idx.len() as u32).collect::<Vec<_>>());
    }
}

#[test]
fn one_vs_rest_on_separated_synthetic() {
    let ds = generate_synthetic(&SynthConfig {
        n_models: 6,
        k_per_cell: 30,
        inter_sep: 12.0,
        ..config()
    })
    .unwrap();
    let cfg = RunConfig {
        k_ref: 10,
        repetitions: 3,
        seed: 0,
        normalize: false,
    };
    for m in 0..6 {
        let r = run_one_vs_rest_full(&ds, ModelId(m), &cfg).unwrap();
        assert!(r.one_vs_rest[0].accuracy >= 0.99);
    }
}
