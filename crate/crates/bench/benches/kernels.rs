use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lbaudit::attribution::{build_centroid_table, classify};
use lbaudit::baselines::{denoise, reduced_spectrum, synthesize_power_law_image};
use lbaudit::defense::{defend, DefenseConfig, DifferentiableEncoder, ToyEncoder};
use lbaudit::distinguishability::{prompt_distinguishability, PromptPool};
use lbaudit::image::ImageGrid;
use lbaudit::store::{generate_synthetic, PromptId};
use lbaudit::SynthConfig;

fn synth() -> lbaudit::Dataset {
    generate_synthetic(&SynthConfig {
        dim: 64,
        n_models: 22,
        n_prompts: 1,
        k_per_cell: 30,
        inter_sep: 4.0,
        intra_std: 1.0,
        rng_seed: 0,
    })
    .unwrap()
}

fn attribution(c: &mut Criterion) {
    let ds = synth();
    let table = build_centroid_table(&ds, PromptId(0)).unwrap();
    let queries: Vec<Vec<f64>> = ds.records().iter().map(|r| r.vector_f64()).collect();
    c.bench_function("classify 660 queries, 22 centroids, d=64", |b| {
        b.iter(|| {
            for q in &queries {
                black_box(classify(q, &table, false).unwrap());
            }
        })
    });
    let pool = PromptPool::from_dataset(&ds, PromptId(0)).unwrap();
    c.bench_function("distinguishability 22 x 30, d=64", |b| {
        b.iter(|| black_box(prompt_distinguishability(&pool, 0.75, false).unwrap()))
    });
}

fn images(c: &mut Criterion) {
    let img = synthesize_power_law_image(128, 2.0, 0).unwrap();
    c.bench_function("median denoise 128x128", |b| b.iter(|| black_box(denoise(&img).unwrap())));
    c.bench_function("reduced spectrum 128x128", |b| b.iter(|| black_box(reduced_spectrum(&img).unwrap())));

    let encoders: Vec<ToyEncoder> = (1..=4).map(|s| ToyEncoder::new(s, (8, 8), 16).unwrap()).collect();
    let refs: Vec<&dyn DifferentiableEncoder> = encoders.iter().map(|e| e as &dyn DifferentiableEncoder).collect();
    let original = ImageGrid::new(8, 8, (0..64).map(|i| i as f64 / 64.0).collect()).unwrap();
    let positive = ImageGrid::new(8, 8, (0..64).map(|i| 1.0 - i as f64 / 64.0).collect()).unwrap();
    let cfg = DefenseConfig {
        epsilon: 8.0,
        ..DefenseConfig::default()
    };
    c.bench_function("defend 8x8, 4 encoders, 100 iterations", |b| {
        b.iter(|| black_box(defend(&original, &positive, &cfg, &refs).unwrap()))
    });
}

criterion_group!(benches, attribution, images);
criterion_main!(benches);
