//! Mini-batch SGD on the L2-regularized hinge loss. Plain SVM and Sec-SVM
//! share this engine; Sec-SVM clamps every weight to `[-k, k]` after each
//! step.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::auroc;
use super::{FeatureError, FeatureVocabulary, LinearModel, ModelKind, Sample};

/// Multiplicative decay of `k` between grid-search steps.
pub const K_DECAY: f64 = 0.8;
/// Upper bound on grid-search steps below the starting `k`.
pub const K_MAX_STEPS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Hinge-loss weight relative to the L2 term.
    pub c: f64,
    pub seed: u64,
}

impl SgdConfig {
    /// Settings sized for corpora of a few thousand programs.
    pub fn desk(seed: u64) -> Self {
        Self { batch_size: 32, learning_rate: 0.05, epochs: 60, c: 1.0, seed }
    }

    /// Full-scale Sec-SVM settings: batch 1024, learning rate 1e-4, 75 epochs.
    pub fn paper_secsvm(seed: u64) -> Self {
        Self { batch_size: 1024, learning_rate: 1e-4, epochs: 75, c: 1.0, seed }
    }

    fn validate(&self) -> Result<(), FeatureError> {
        if self.batch_size == 0 || self.epochs == 0 || !(self.learning_rate > 0.0) || !(self.c > 0.0) {
            return Err(FeatureError::Contract(format!("invalid SGD configuration {self:?}")));
        }
        Ok(())
    }
}

fn check_classes(samples: &[Sample]) -> Result<(), FeatureError> {
    let pos = samples.iter().filter(|s| s.malware).count();
    if pos == 0 || pos == samples.len() {
        return Err(FeatureError::SingleClass);
    }
    Ok(())
}

fn sgd(
    samples: &[Sample],
    vocab: &FeatureVocabulary,
    cfg: &SgdConfig,
    clip: Option<f64>,
) -> Result<LinearModel, FeatureError> {
    cfg.validate()?;
    check_classes(samples)?;
    let dim = vocab.len();
    for s in samples {
        if s.x.dim() != dim {
            return Err(FeatureError::DimensionMismatch { expected: dim, got: s.x.dim() });
        }
    }
    let n = samples.len() as f64;
    let lambda = 1.0 / (cfg.c * n);
    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = cfg.learning_rate / batch.len() as f64;
            // Margin violators under the current parameters.
            let mut violators: Vec<(usize, f64)> = Vec::new();
            for &i in batch {
                let s = &samples[i];
                let y = if s.malware { 1.0 } else { -1.0 };
                let score = b + s.x.iter().map(|j| w[j]).sum::<f64>();
                let margin = y * score;
                if margin < 1.0 {
                    epoch_loss += 1.0 - margin;
                    violators.push((i, y));
                }
            }
            let shrink = 1.0 - cfg.learning_rate * lambda;
            for wi in w.iter_mut() {
                *wi *= shrink;
            }
            for (i, y) in violators {
                for j in samples[i].x.iter() {
                    w[j] += scale * y;
                }
                b += scale * y;
            }
            if let Some(k) = clip {
                for wi in w.iter_mut() {
                    *wi = wi.clamp(-k, k);
                }
            }
            step += 1;
        }
        if !epoch_loss.is_finite() || !b.is_finite() {
            return Err(FeatureError::Divergence { epoch, step, loss: epoch_loss });
        }
        if epoch % 20 == 0 {
            debug!("sgd epoch {epoch}: mean hinge {:.4}", epoch_loss / n);
        }
    }
    let mut model = LinearModel::new(w, b, vocab);
    if let Some(k) = clip {
        model.kind = ModelKind::SecSvm;
        model.clip_k = Some(k);
    }
    Ok(model)
}

/// Linear SVM: hinge loss with L2 regularization weighted by `c`.
pub fn train_svm(samples: &[Sample], vocab: &FeatureVocabulary, c: f64, seed: u64) -> Result<LinearModel, FeatureError> {
    let cfg = SgdConfig { c, ..SgdConfig::desk(seed) };
    train_svm_with(samples, vocab, &cfg)
}

pub fn train_svm_with(samples: &[Sample], vocab: &FeatureVocabulary, cfg: &SgdConfig) -> Result<LinearModel, FeatureError> {
    sgd(samples, vocab, cfg, None)
}

/// Sec-SVM: the same objective with weights clamped to `[-k, k]` after every
/// optimization step, so `max |w_i| <= k` holds exactly.
pub fn train_secsvm(
    samples: &[Sample],
    vocab: &FeatureVocabulary,
    cfg: &SgdConfig,
    k: f64,
) -> Result<LinearModel, FeatureError> {
    if !(k > 0.0) {
        return Err(FeatureError::Contract(format!("Sec-SVM bound must be positive, got {k}")));
    }
    sgd(samples, vocab, cfg, Some(k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub k: f64,
    pub reference_auroc: f64,
    /// Every evaluated `(k, auroc)` in sweep order.
    pub sweep: Vec<(f64, f64)>,
}

/// Shrink `k` geometrically from the plain SVM's largest weight magnitude and
/// keep the smallest value whose AUROC on `eval` stays within `loss_budget`
/// of the plain SVM. Stops at the first violation.
pub fn grid_search_k(
    train: &[Sample],
    eval: &[Sample],
    vocab: &FeatureVocabulary,
    cfg: &SgdConfig,
    loss_budget: f64,
) -> Result<GridSearchResult, FeatureError> {
    grid_search_k_with_floor(train, eval, vocab, cfg, loss_budget, None)
}

/// Fraction of malware in `samples` scored above zero.
pub fn detection_rate(model: &LinearModel, samples: &[Sample]) -> f64 {
    let malware: Vec<&Sample> = samples.iter().filter(|s| s.malware).collect();
    if malware.is_empty() {
        return 0.0;
    }
    malware.iter().filter(|s| model.bias + model.dot(&s.x) > 0.0).count() as f64 / malware.len() as f64
}

/// As [`grid_search_k`], but the sweep also stops once the detection rate at
/// threshold zero falls more than `detection_budget` below the plain SVM's.
/// AUROC ignores the threshold, so without this floor a tightly clipped model
/// can rank perfectly while flagging nothing.
pub fn grid_search_k_with_floor(
    train: &[Sample],
    eval: &[Sample],
    vocab: &FeatureVocabulary,
    cfg: &SgdConfig,
    loss_budget: f64,
    detection_budget: Option<f64>,
) -> Result<GridSearchResult, FeatureError> {
    if !(loss_budget > 0.0 && loss_budget <= 1.0) {
        return Err(FeatureError::Contract(format!("loss budget {loss_budget} outside (0, 1]")));
    }
    if let Some(d) = detection_budget {
        if !(d > 0.0 && d <= 1.0) {
            return Err(FeatureError::Contract(format!("detection budget {d} outside (0, 1]")));
        }
    }
    let svm = train_svm_with(train, vocab, cfg)?;
    let reference = auroc(&svm, eval)?;
    let reference_tpr = detection_rate(&svm, eval);
    let k0 = svm.max_abs_weight();
    let mut best = k0;
    let mut sweep = Vec::new();
    let mut k = k0;
    for _ in 0..K_MAX_STEPS {
        k *= K_DECAY;
        let sec = train_secsvm(train, vocab, cfg, k)?;
        let a = auroc(&sec, eval)?;
        let tpr = detection_rate(&sec, eval);
        sweep.push((k, a));
        debug!("grid search k={k:.5} auroc={a:.4} tpr={tpr:.3} (reference {reference:.4}, tpr {reference_tpr:.3})");
        if reference - a > loss_budget {
            break;
        }
        if detection_budget.is_some_and(|d| reference_tpr - tpr > d) {
            break;
        }
        best = k;
    }
    Ok(GridSearchResult { k: best, reference_auroc: reference, sweep })
}

/// Keep the `n` features with the largest absolute weight in an L2-regularized
/// linear fit. Returns the reduced vocabulary and the old→new position map.
pub fn feature_select_topn(
    samples: &[Sample],
    vocab: &FeatureVocabulary,
    n: usize,
    cfg: &SgdConfig,
) -> Result<(FeatureVocabulary, Vec<Option<usize>>), FeatureError> {
    if n > vocab.len() {
        return Err(FeatureError::Contract(format!(
            "cannot select {n} of {} features",
            vocab.len()
        )));
    }
    let keep: Vec<usize> = if n == vocab.len() {
        (0..n).collect()
    } else {
        let fit = train_svm_with(samples, vocab, cfg)?;
        let mut ranked: Vec<usize> = (0..vocab.len()).collect();
        ranked.sort_by(|&a, &b| {
            fit.weights[b].abs().total_cmp(&fit.weights[a].abs()).then(a.cmp(&b))
        });
        ranked.truncate(n);
        ranked.sort_unstable();
        ranked
    };
    let reduced = vocab.restrict(&keep)?;
    let mut map = vec![None; vocab.len()];
    for (new, &old) in keep.iter().enumerate() {
        map[old] = Some(new);
    }
    Ok((reduced, map))
}
