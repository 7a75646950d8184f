use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureFamily {
    Capability,
    Component,
    Intent,
    ApiCall,
    Endpoint,
}

impl FeatureFamily {
    /// Classify a feature name by its `prefix::` tag.
    pub fn of(name: &str) -> Option<FeatureFamily> {
        let prefix = name.split("::").next()?;
        Some(match prefix {
            "capability" => FeatureFamily::Capability,
            "activity" | "service" | "receiver" | "provider" => FeatureFamily::Component,
            "intent" => FeatureFamily::Intent,
            "api" => FeatureFamily::ApiCall,
            "url" => FeatureFamily::Endpoint,
            _ => return None,
        })
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureFamily::Capability => "capability",
            FeatureFamily::Component => "component",
            FeatureFamily::Intent => "intent",
            FeatureFamily::ApiCall => "api-call",
            FeatureFamily::Endpoint => "endpoint",
        };
        f.write_str(s)
    }
}

/// Ordered, duplicate-free list of feature names with dense positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVocabulary {
    entries: Vec<(String, FeatureFamily)>,
    index: HashMap<String, usize>,
}

impl FeatureVocabulary {
    pub fn new<I, S>(names: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut entries = Vec::new();
        let mut index = HashMap::new();
        for name in names {
            let name = name.into();
            let family =
                FeatureFamily::of(&name).ok_or_else(|| FeatureError::UnknownFamily(name.clone()))?;
            if index.insert(name.clone(), entries.len()).is_some() {
                return Err(FeatureError::DuplicateFeature(name));
            }
            entries.push((name, family));
        }
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, pos: usize) -> &str {
        &self.entries[pos].0
    }

    pub fn family(&self, pos: usize) -> FeatureFamily {
        self.entries[pos].1
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Positions belonging to any of `families`.
    pub fn positions_in(&self, families: &[FeatureFamily]) -> Vec<usize> {
        (0..self.len()).filter(|&i| families.contains(&self.family(i))).collect()
    }

    /// Sub-vocabulary keeping `positions` in ascending order.
    pub fn restrict(&self, positions: &[usize]) -> Result<Self, FeatureError> {
        let mut keep = positions.to_vec();
        keep.sort_unstable();
        keep.dedup();
        Self::new(keep.into_iter().map(|p| self.entries[p].0.clone()))
    }

    /// Content hash over names in order; identifies the vocabulary in model
    /// files and ice-box indexes.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (n, _) in &self.entries {
            h.update(n.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_unique_positions() {
        let v = FeatureVocabulary::new(["api::a.b", "capability::INTERNET", "url::x"]).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.position("capability::INTERNET"), Some(1));
        assert_eq!(v.family(2), FeatureFamily::Endpoint);
        assert!(matches!(
            FeatureVocabulary::new(["api::a", "api::a"]),
            Err(FeatureError::DuplicateFeature(_))
        ));
        assert!(FeatureVocabulary::new(["nope"]).is_err());
    }

    #[test]
    fn restrict_preserves_order() {
        let v = FeatureVocabulary::new(["api::a", "api::b", "api::c"]).unwrap();
        let r = v.restrict(&[2, 0]).unwrap();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["api::a", "api::c"]);
        assert_eq!(v.restrict(&[0, 1, 2]).unwrap(), v);
        assert_ne!(r.hash(), v.hash());
    }
}
