//! Detection metrics: ROC curve, AUROC via the Mann-Whitney rank statistic,
//! and a few summary statistics used by reports.

use super::{FeatureError, LinearModel, Sample};

/// Area under the ROC curve for `scores` where `positive[i]` marks malware.
/// Tied scores receive their average rank.
pub fn auroc_scores(scores: &[f64], positive: &[bool]) -> Result<f64, FeatureError> {
    assert_eq!(scores.len(), positive.len(), "scores and labels differ in length");
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(FeatureError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn auroc(model: &LinearModel, samples: &[Sample]) -> Result<f64, FeatureError> {
    let scores = samples
        .iter()
        .map(|s| model.discriminant(&s.x))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<bool> = samples.iter().map(|s| s.malware).collect();
    auroc_scores(&scores, &labels)
}

/// ROC points `(fpr, tpr, threshold)` from the strictest threshold down,
/// starting at (0, 0).
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<Vec<(f64, f64, f64)>, FeatureError> {
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(FeatureError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0, f64::INFINITY)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64, t));
    }
    Ok(points)
}

/// Linear-interpolation quantile of already sorted data, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

/// Shannon entropy (nats) of the normalized magnitudes `|w_i| / Σ|w|`.
pub fn weight_entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().map(|w| w.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    weights
        .iter()
        .map(|w| w.abs() / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(P·N) pair counting, ties counted as one half.
    fn auroc_pairs(scores: &[f64], positive: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if positive[i] && !positive[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_reversed_and_tied() {
        let labels = [false, false, true, true];
        assert_eq!(auroc_scores(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
        assert_eq!(auroc_scores(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 0.0);
        assert_eq!(auroc_scores(&[0.5; 4], &labels).unwrap(), 0.5);
        assert!(matches!(auroc_scores(&[0.1, 0.2], &[true, true]), Err(FeatureError::SingleClass)));
    }

    #[test]
    fn null_classifier_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
        let labels: Vec<bool> = (0..1000).map(|_| rng.gen_bool(0.5)).collect();
        let a = auroc_scores(&scores, &labels).unwrap();
        assert!((a - 0.5).abs() <= 0.05, "{a}");
    }

    #[test]
    fn matches_pair_counting_and_is_monotone_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let n = rng.gen_range(4..60);
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..10) as f64) / 3.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            labels[0] = true;
            labels[1] = false;
            let a = auroc_scores(&scores, &labels).unwrap();
            assert!((a - auroc_pairs(&scores, &labels)).abs() < 1e-12);
            let warped: Vec<f64> = scores.iter().map(|s| (s * 2.0).exp() - 7.0).collect();
            assert!((a - auroc_scores(&warped, &labels).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn roc_endpoints() {
        let pts = roc_curve(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!(pts.first().map(|p| (p.0, p.1)), Some((0.0, 0.0)));
        assert_eq!(pts.last().map(|p| (p.0, p.1)), Some((1.0, 1.0)));
    }

    #[test]
    fn quantiles_and_entropy() {
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert!(weight_entropy(&[1.0, 1.0, 1.0, 1.0]) > weight_entropy(&[3.0, 0.1, 0.1, 0.1]));
    }
}
