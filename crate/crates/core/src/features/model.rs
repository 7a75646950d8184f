use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FeatureError, FeatureVector, FeatureVocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    PlainSvm,
    SecSvm,
}

/// Linear discriminant `h(x) = w·x + b`. Positive scores mean malware.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub kind: ModelKind,
    /// Weight magnitude bound, Sec-SVM only.
    pub clip_k: Option<f64>,
    pub vocab_hash: String,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    vocab_hash: String,
    kind: ModelKind,
    k: Option<f64>,
    bias: f64,
    dim: usize,
    weights: Vec<(usize, f64)>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64, vocab: &FeatureVocabulary) -> Self {
        Self { weights, bias, kind: ModelKind::PlainSvm, clip_k: None, vocab_hash: vocab.hash() }
    }

    /// Model over an anonymous vocabulary, for tests and toy examples.
    pub fn from_weights(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias, kind: ModelKind::PlainSvm, clip_k: None, vocab_hash: String::new() }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, x: &FeatureVector) -> Result<(), FeatureError> {
        if x.dim() != self.dim() {
            return Err(FeatureError::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        Ok(())
    }

    pub fn discriminant(&self, x: &FeatureVector) -> Result<f64, FeatureError> {
        self.check(x)?;
        Ok(self.bias + self.dot(x))
    }

    /// `w·x` without the bias.
    pub fn dot(&self, x: &FeatureVector) -> f64 {
        x.iter().map(|i| self.weights[i]).sum()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Hash of everything that determines scores; ice-boxes record it.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.vocab_hash.as_bytes());
        h.update(format!("{:?}", self.kind).as_bytes());
        h.update(self.clip_k.unwrap_or(f64::NAN).to_bits().to_le_bytes());
        h.update(self.bias.to_bits().to_le_bytes());
        for w in &self.weights {
            h.update(w.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            vocab_hash: self.vocab_hash.clone(),
            kind: self.kind,
            k: self.clip_k,
            bias: self.bias,
            dim: self.dim(),
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i, *w))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FeatureError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| FeatureError::Format(e.to_string()))?;
        let mut weights = vec![0.0; file.dim];
        for (i, w) in file.weights {
            let slot = weights
                .get_mut(i)
                .ok_or(FeatureError::OutOfBounds { position: i, dim: file.dim })?;
            *slot = w;
        }
        Ok(Self { weights, bias: file.bias, kind: file.kind, clip_k: file.k, vocab_hash: file.vocab_hash })
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Verify this model was trained over `vocab`.
    pub fn check_vocab(&self, vocab: &FeatureVocabulary) -> Result<(), FeatureError> {
        if self.vocab_hash != vocab.hash() || self.dim() != vocab.len() {
            return Err(FeatureError::VocabularyMismatch);
        }
        Ok(())
    }
}
