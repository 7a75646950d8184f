use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureVocabulary};

/// Sparse binary vector: the set of positions holding a 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    bits: BTreeSet<usize>,
}

impl FeatureVector {
    pub fn empty(dim: usize) -> Self {
        Self { dim, bits: BTreeSet::new() }
    }

    pub fn from_positions(
        dim: usize,
        positions: impl IntoIterator<Item = usize>,
    ) -> Result<Self, FeatureError> {
        let bits: BTreeSet<usize> = positions.into_iter().collect();
        if let Some(&p) = bits.iter().next_back() {
            if p >= dim {
                return Err(FeatureError::OutOfBounds { position: p, dim });
            }
        }
        Ok(Self { dim, bits })
    }

    /// Set the positions of the named features, ignoring names outside the
    /// vocabulary.
    pub fn from_names<'a>(
        vocab: &FeatureVocabulary,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let bits = names.into_iter().filter_map(|n| vocab.position(n)).collect();
        Self { dim: vocab.len(), bits }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.bits.contains(&pos)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().copied()
    }

    pub fn insert(&mut self, pos: usize) -> Result<bool, FeatureError> {
        if pos >= self.dim {
            return Err(FeatureError::OutOfBounds { position: pos, dim: self.dim });
        }
        Ok(self.bits.insert(pos))
    }

    fn check_dim(&self, other: &Self) -> Result<(), FeatureError> {
        if self.dim != other.dim {
            return Err(FeatureError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    pub fn union(&self, other: &Self) -> Result<Self, FeatureError> {
        self.check_dim(other)?;
        Ok(Self { dim: self.dim, bits: self.bits.union(&other.bits).copied().collect() })
    }

    /// `self ∧ ¬other`.
    pub fn difference(&self, other: &Self) -> Result<Self, FeatureError> {
        self.check_dim(other)?;
        Ok(Self { dim: self.dim, bits: self.bits.difference(&other.bits).copied().collect() })
    }

    pub fn is_superset(&self, other: &Self) -> bool {
        self.dim == other.dim && self.bits.is_superset(&other.bits)
    }

    pub fn names<'v>(&self, vocab: &'v FeatureVocabulary) -> Vec<&'v str> {
        self.bits.iter().map(|&p| vocab.name(p)).collect()
    }

    /// Re-index onto a sub-vocabulary given `old position -> new position`.
    pub fn project(&self, map: &[Option<usize>], new_dim: usize) -> Self {
        let bits = self.bits.iter().filter_map(|&p| map.get(p).copied().flatten()).collect();
        Self { dim: new_dim, bits }
    }
}
