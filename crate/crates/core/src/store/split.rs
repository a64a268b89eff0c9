use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Samples `k_ref` records per cell without replacement into the reference
/// split; the rest go to the holdout split. Cells are visited in
/// (prompt, model) order so the result depends only on `rng_seed`.
pub fn split_reference_holdout(ds: &Dataset, k_ref: usize, rng_seed: u64) -> Result<(Dataset, Dataset)> {
    if k_ref == 0 {
        return Err(Error::param("k_ref", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut reference = Vec::new();
    let mut holdout = Vec::new();

    for (&(prompt, model), rows) in ds.cells() {
        if rows.len() <= k_ref {
            return Err(Error::SplitInfeasible {
                prompt: prompt.0,
                model: model.0,
                available: rows.len(),
                k_ref,
            });
        }
        let mut chosen = vec![false; rows.len()];
        for i in sample(&mut rng, rows.len(), k_ref) {
            chosen[i] = true;
        }
        for (pos, &row) in rows.iter().enumerate() {
            let rec = ds.records()[row].clone();
            if chosen[pos] {
                reference.push(rec);
            } else {
                holdout.push(rec);
            }
        }
    }

    let build = |records| Dataset::new(ds.dim(), ds.models().to_vec(), ds.prompts().to_vec(), records);
    Ok((build(reference)?, build(holdout)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{generate_synthetic, ModelId, PromptId, SynthConfig};

    fn ds(k: usize) -> Dataset {
        generate_synthetic(&SynthConfig {
            dim: 4,
            n_models: 3,
            n_prompts: 2,
            k_per_cell: k,
            inter_sep: 2.0,
            intra_std: 1.0,
            rng_seed: 9,
        })
        .unwrap()
    }

    #[test]
    fn no_holdout_is_an_error() {
        assert!(matches!(
            split_reference_holdout(&ds(30), 30, 0),
            Err(Error::SplitInfeasible { available: 30, k_ref: 30, .. })
        ));
    }

    #[test]
    fn leaves_one_out_per_cell() {
        let (r, h) = split_reference_holdout(&ds(30), 29, 0).unwrap();
        assert!(h.cells().values().all(|v| v.len() == 1));
        assert!(r.cells().values().all(|v| v.len() == 29));
    }

    #[test]
    fn union_is_original_multiset() {
        let d = ds(10);
        let (r, h) = split_reference_holdout(&d, 4, 17).unwrap();
        let key = |rec: &crate::store::EmbeddingRecord| (rec.prompt, rec.model, rec.seed_index);
        let mut all: Vec<_> = r.records().iter().chain(h.records()).map(key).collect();
        let mut orig: Vec<_> = d.records().iter().map(key).collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
        // disjoint
        let mut rk: Vec<_> = r.records().iter().map(key).collect();
        rk.sort();
        assert!(h.records().iter().all(|x| rk.binary_search(&key(x)).is_err()));
        // vectors follow their keys
        for rec in r.records().iter().chain(h.records()) {
            let src = d
                .cell(rec.prompt, rec.model)
                .find(|o| o.seed_index == rec.seed_index)
                .unwrap();
            assert_eq!(src.vector, rec.vector);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let d = ds(10);
        assert_eq!(split_reference_holdout(&d, 3, 5).unwrap(), split_reference_holdout(&d, 3, 5).unwrap());
        let a = split_reference_holdout(&d, 3, 5).unwrap().0;
        let b = split_reference_holdout(&d, 3, 6).unwrap().0;
        let seeds = |x: &Dataset| x.cell(PromptId(0), ModelId(0)).map(|r| r.seed_index).collect::<Vec<_>>();
        assert!(a.prompt_ids().count() == 2 && (seeds(&a) != seeds(&b) || a != b));
    }
}
