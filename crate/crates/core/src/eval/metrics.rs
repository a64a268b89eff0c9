use serde::{Deserialize, Serialize};

use crate::baselines::pearson;
use crate::error::{Error, Result};

fn check_sides(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() {
        return Err(Error::Empty("no positive scores"));
    }
    if neg.is_empty() {
        return Err(Error::Empty("no negative scores"));
    }
    if pos.iter().chain(neg).any(|v| v.is_nan()) {
        return Err(Error::param("scores", "NaN score"));
    }
    Ok(())
}

/// `P(pos > neg) + ½ P(pos = neg)` over all pairs, counted exactly.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check_sides(pos, neg)?;
    let mut sorted = neg.to_vec();
    sorted.sort_by(f64::total_cmp);
    // twice the Mann-Whitney U, kept integral
    let mut twice_u: u128 = 0;
    for &p in pos {
        let below = sorted.partition_point(|&v| v < p);
        let not_above = sorted.partition_point(|&v| v <= p);
        twice_u += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(twice_u as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64)
}

/// TPR at the smallest threshold with at most `fpr_target` of negatives
/// strictly above it. Positives count when strictly above the threshold.
pub fn tpr_at_fpr(pos: &[f64], neg: &[f64], fpr_target: f64) -> Result<f64> {
    check_sides(pos, neg)?;
    if !(0.0..=1.0).contains(&fpr_target) {
        return Err(Error::param("fpr_target", format!("{fpr_target} not in [0, 1]")));
    }
    let mut sorted = neg.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let allowed = (fpr_target * sorted.len() as f64 + 1e-9).floor() as usize;
    let hits = match sorted.get(allowed) {
        Some(&t) => pos.iter().filter(|&&p| p > t).count(),
        None => pos.len(),
    };
    Ok(hits as f64 / pos.len() as f64)
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Empty("spearman needs at least two points"));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(Error::Empty("mean of empty set"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(MeanStd { mean, std: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise_auc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in pos {
            for n in neg {
                if p > n {
                    s += 1.0;
                } else if p == n {
                    s += 0.5;
                }
            }
        }
        s / (pos.len() * neg.len()) as f64
    }

    fn sweep_tpr(pos: &[f64], neg: &[f64], fpr: f64) -> f64 {
        let mut cands: Vec<f64> = neg.to_vec();
        cands.push(f64::NEG_INFINITY);
        let mut best = f64::INFINITY;
        for &t in &cands {
            let above = neg.iter().filter(|&&n| n > t).count() as f64;
            if above <= fpr * neg.len() as f64 + 1e-9 && t < best {
                best = t;
            }
        }
        pos.iter().filter(|&&p| p > best).count() as f64 / pos.len() as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8], &[0.7, 0.85]).unwrap(), 0.75);
        assert_eq!(auc(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.5);
        assert_eq!(auc(&[1.0; 4], &[1.0; 3]).unwrap(), 0.5);
        assert!(auc(&[], &[1.0]).is_err());
        assert!(auc(&[1.0], &[]).is_err());
    }

    #[test]
    fn auc_matches_pairwise_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let np = rng.random_range(1..=100);
            let nn = rng.random_range(1..=100);
            // coarse grid forces ties
            let pos: Vec<f64> = (0..np).map(|_| rng.random_range(0..20) as f64 / 4.0).collect();
            let neg: Vec<f64> = (0..nn).map(|_| rng.random_range(0..20) as f64 / 5.0).collect();
            assert!((auc(&pos, &neg).unwrap() - pairwise_auc(&pos, &neg)).abs() < 1e-12);
        }
    }

    #[test]
    fn tpr_examples() {
        assert_eq!(tpr_at_fpr(&[5.0, 6.0], &[1.0, 2.0], 0.01).unwrap(), 1.0);
        // fpr below 1/|neg|: threshold sits at the top negative
        assert_eq!(tpr_at_fpr(&[1.5, 3.0, 2.5], &[1.0, 2.0, 2.5], 0.01).unwrap(), 1.0 / 3.0);
        assert_eq!(tpr_at_fpr(&[0.0], &[1.0], 1.0).unwrap(), 1.0);
        assert!(tpr_at_fpr(&[1.0], &[1.0], 1.5).is_err());
    }

    #[test]
    fn tpr_matches_threshold_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let np = rng.random_range(1..=200);
            let nn = rng.random_range(1..=200);
            let pos: Vec<f64> = (0..np).map(|_| rng.random_range(0..30) as f64 + 3.0).collect();
            let neg: Vec<f64> = (0..nn).map(|_| rng.random_range(0..30) as f64).collect();
            for fpr in [0.01, 0.05, 0.1] {
                assert_eq!(tpr_at_fpr(&pos, &neg, fpr).unwrap(), sweep_tpr(&pos, &neg, fpr));
            }
            assert!(tpr_at_fpr(&pos, &neg, 0.01).unwrap() <= tpr_at_fpr(&pos, &neg, 0.05).unwrap());
        }
    }

    #[test]
    fn ranks_and_spearman() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mean_std_population() {
        let m = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert_eq!(mean_std(&[4.0]).unwrap().std, 0.0);
        assert!(mean_std(&[]).is_err());
    }

    proptest! {
        #[test]
        fn auc_in_unit_interval_and_antisymmetric(
            pos in prop::collection::vec(-5i32..5, 1..40),
            neg in prop::collection::vec(-5i32..5, 1..40),
        ) {
            let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
            let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
            let a = auc(&pos, &neg).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a + auc(&neg, &pos).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
