use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lbaudit::baselines::{dzanic_attribute, dzanic_signature, marra_attribute, marra_fingerprint, FitBand};
use lbaudit::defense::{defend, gaussian_noise_undo, loss_trace_csv, run_toy_attack, DefenseConfig, DifferentiableEncoder, ToyAttackConfig, ToyEncoder};
use lbaudit::distinguishability::{rank_prompts, scores_to_csv};
use lbaudit::eval::{
    attack_cost, run_full_report, run_multiclass, run_one_vs_rest_full, run_one_vs_rest_limited, success_vs_distinguishability, CostModel, EvalReport, RunConfig,
};
use lbaudit::image::{load_pgm, write_pgm, ImageGrid};
use lbaudit::json::to_canonical_string;
use lbaudit::store::{generate_synthetic, load_manifest, save_dataset, ModelId};
use lbaudit::{Error, Result, SynthConfig};
use serde_json::json;

use crate::{Command, EvalArgs, OvrMode};

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, content).map_err(|e| Error::io(p, e)),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run_config(a: &EvalArgs) -> RunConfig {
    RunConfig {
        k_ref: a.k_ref,
        repetitions: a.reps,
        seed: a.seed,
        normalize: a.normalize,
    }
}

fn eval_report(a: &EvalArgs, f: impl FnOnce(&lbaudit::Dataset, &RunConfig) -> Result<EvalReport>) -> Result<()> {
    let ds = load_manifest(&a.manifest)?;
    let start = Instant::now();
    let mut report = f(&ds, &run_config(a))?;
    if a.timing {
        report.runtime_secs = Some(start.elapsed().as_secs_f64());
    }
    emit(a.out.as_deref(), &report.to_json()?)
}

type Tree = Vec<(String, Vec<(String, ImageGrid)>)>;

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    Ok(paths)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `DIR/<model>/*.pgm`, models and files in name order.
fn load_tree(root: &Path) -> Result<Tree> {
    let mut tree = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let mut images = Vec::new();
        for f in sorted_entries(&dir)? {
            if f.extension().is_some_and(|e| e == "pgm") {
                images.push((file_name(&f), load_pgm(&f)?));
            }
        }
        if images.is_empty() {
            return Err(Error::Empty("model directory without .pgm files"));
        }
        tree.push((file_name(&dir), images));
    }
    if tree.len() < 2 {
        return Err(Error::param("train", "need at least two model directories"));
    }
    Ok(tree)
}

fn baseline(
    method: &str,
    train: &Path,
    test: &Path,
    attribute: impl Fn(&[(String, Vec<(String, ImageGrid)>)], &ImageGrid) -> Result<Vec<(ModelId, f64)>>,
) -> Result<String> {
    let train_tree = load_tree(train)?;
    let names: Vec<&str> = train_tree.iter().map(|(n, _)| n.as_str()).collect();
    let test_tree = load_tree(test)?;
    let mut predictions = Vec::new();
    let mut hits = 0usize;
    for (truth, images) in &test_tree {
        if !names.contains(&truth.as_str()) {
            return Err(Error::param("test", format!("model {truth} has no training images")));
        }
        for (file, img) in images {
            let ranked = attribute(&train_tree, img)?;
            let (best, score) = ranked[0];
            let predicted = names[best.0 as usize];
            if predicted == truth {
                hits += 1;
            }
            predictions.push(json!({
                "file": format!("{truth}/{file}"),
                "truth": truth,
                "predicted": predicted,
                "score": score,
            }));
        }
    }
    let n = predictions.len();
    to_canonical_string(&json!({
        "method": method,
        "models": names,
        "n_test": n,
        "top1": hits as f64 / n as f64,
        "predictions": predictions,
    }))
}

fn images_of(tree: &[(String, Vec<(String, ImageGrid)>)], i: usize) -> Vec<ImageGrid> {
    tree[i].1.iter().map(|(_, img)| img.clone()).collect()
}

fn square(img: &ImageGrid) -> ImageGrid {
    if img.width() == img.height() {
        img.clone()
    } else {
        img.center_crop_square()
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenSynth {
            dim,
            models,
            prompts,
            k,
            inter_sep,
            intra_std,
            seed,
            out,
        } => {
            let ds = generate_synthetic(&SynthConfig {
                dim,
                n_models: models,
                n_prompts: prompts,
                k_per_cell: k,
                inter_sep,
                intra_std,
                rng_seed: seed,
            })?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let manifest = save_dataset(&ds, &out)?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Attribute(a) => eval_report(&a, run_multiclass),
        Command::OneVsRest { eval, mode, target, alpha } => match mode {
            OvrMode::Full => eval_report(&eval, |ds, c| run_one_vs_rest_full(ds, ModelId(target), c)),
            OvrMode::Limited => eval_report(&eval, |ds, c| run_one_vs_rest_limited(ds, ModelId(target), &alpha, c)),
        },
        Command::Report { eval, alpha } => eval_report(&eval, |ds, c| run_full_report(ds, &alpha, c)),
        Command::Distinguishability {
            manifest,
            tau,
            normalize,
            out,
        } => {
            let ds = load_manifest(&manifest)?;
            let ranking = rank_prompts(&ds, tau, normalize)?;
            if let Some(f) = ranking.failures.first() {
                return Err(Error::param("manifest", format!("prompt {}: {}", f.prompt, f.error)));
            }
            let models: Vec<ModelId> = ds.model_ids().collect();
            emit(out.as_deref(), &scores_to_csv(&ranking.scores, &models))
        }
        Command::SuccessCurve {
            manifest,
            tau,
            bins,
            k_ref,
            seed,
            normalize,
            points,
            out,
        } => {
            let ds = load_manifest(&manifest)?;
            let curve = success_vs_distinguishability(&ds, tau, bins, k_ref, seed, normalize)?;
            if let Some(p) = points {
                emit(Some(&p), &curve.points_csv())?;
            }
            emit(out.as_deref(), &curve.bins_csv())
        }
        Command::BaselineMarra { train, test, out } => {
            let json = baseline("marra", &train, &test, |tree, img| {
                let fps = (0..tree.len())
                    .map(|i| marra_fingerprint(&images_of(tree, i), ModelId(i as u32)))
                    .collect::<Result<Vec<_>>>()?;
                marra_attribute(img, &fps)
            })?;
            emit(out.as_deref(), &json)
        }
        Command::BaselineFourier {
            train,
            test,
            band_lo,
            band_hi,
            out,
        } => {
            let band = FitBand::new(band_lo, band_hi)?;
            let json = baseline("fourier", &train, &test, |tree, img| {
                let sigs = (0..tree.len())
                    .map(|i| {
                        let imgs: Vec<ImageGrid> = images_of(tree, i).iter().map(square).collect();
                        dzanic_signature(&imgs, ModelId(i as u32), band)
                    })
                    .collect::<Result<Vec<_>>>()?;
                dzanic_attribute(&square(img), &sigs)
            })?;
            emit(out.as_deref(), &json)
        }
        Command::Defend {
            image,
            positive,
            epsilon,
            eta,
            tau_temp,
            iters,
            encoder_seeds,
            embed_dim,
            out,
            trace,
        } => {
            let img = load_pgm(&image)?;
            let pos = load_pgm(&positive)?;
            let encoders = encoder_seeds
                .iter()
                .map(|&s| ToyEncoder::new(s, img.shape(), embed_dim))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&dyn DifferentiableEncoder> = encoders.iter().map(|e| e as &dyn DifferentiableEncoder).collect();
            let cfg = DefenseConfig {
                epsilon,
                eta,
                tau_temp,
                iterations: iters,
            };
            let r = defend(&img, &pos, &cfg, &refs)?;
            write_pgm(&r.image, &out)?;
            if let Some(t) = trace {
                emit(Some(&t), &loss_trace_csv(&r.loss_trace))?;
            }
            print!(
                "{}",
                to_canonical_string(&json!({
                    "epsilon": epsilon,
                    "final_loss": r.final_loss,
                    "initial_loss": r.loss_trace[0],
                    "linf": r.linf,
                }))?
            );
            Ok(())
        }
        Command::UndoNoise { image, sigma, seed, out } => {
            let img = load_pgm(&image)?;
            write_pgm(&gaussian_noise_undo(&img, sigma / 255.0, seed)?, &out)
        }
        Command::Cost { prices, images, out } => {
            let cm = CostModel {
                prices: prices.iter().enumerate().map(|(i, &p)| (ModelId(i as u32), p)).collect(),
                images_per_model: images,
            };
            let cost = attack_cost(&cm)?;
            emit(
                out.as_deref(),
                &to_canonical_string(&json!({ "cost": cost, "model": cm }))?,
            )
        }
        Command::ToyAttack {
            epsilon,
            eta,
            iters,
            seed,
            out,
        } => {
            let cfg = ToyAttackConfig {
                epsilons: epsilon,
                defense: DefenseConfig {
                    eta,
                    iterations: iters,
                    ..DefenseConfig::default()
                },
                seed,
                ..ToyAttackConfig::default()
            };
            let report = run_toy_attack(&cfg)?;
            emit(out.as_deref(), &to_canonical_string(&json!({ "config": cfg, "report": report }))?)
        }
    }
}
