//! Feature space: vocabulary, sparse binary vectors, the linear discriminant,
//! the addition-only feature-space attack, SVM / Sec-SVM training and
//! detection metrics.

mod metrics;
mod model;
mod omega;
mod train;
mod vector;
mod vocab;

use thiserror::Error;

pub use metrics::{auroc, auroc_scores, quantile, quantile_sorted, roc_curve, weight_entropy};
pub use model::{LinearModel, ModelKind};
pub use omega::{
    attack_objective, feasibility_bound, is_evasive, solve_feature_space_attack,
    FeatureSpaceSolution, OmegaConstraints,
};
pub use train::{
    detection_rate, feature_select_topn, grid_search_k, grid_search_k_with_floor, train_secsvm, train_svm, train_svm_with,
    GridSearchResult, SgdConfig, K_DECAY, K_MAX_STEPS,
};
pub use vector::FeatureVector;
pub use vocab::{FeatureFamily, FeatureVocabulary};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("position {position} out of bounds for dimension {dim}")]
    OutOfBounds { position: usize, dim: usize },
    #[error("model was trained over a different vocabulary")]
    VocabularyMismatch,
    #[error("duplicate feature name '{0}'")]
    DuplicateFeature(String),
    #[error("feature '{0}' has no known family prefix")]
    UnknownFamily(String),
    #[error("confidence kappa must be non-negative, got {0}")]
    NegativeKappa(f64),
    #[error("both classes must be present")]
    SingleClass,
    #[error("training diverged at epoch {epoch} (step {step}): loss {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labeled point; `malware` is the positive class.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: FeatureVector,
    pub malware: bool,
}
