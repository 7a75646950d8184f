//! Feature mapping from programs to named binary features.

use std::collections::BTreeSet;

use super::ast::Program;
use crate::features::{FeatureVector, FeatureVocabulary};

pub fn capability_feature(cap: &str) -> String {
    format!("capability::{cap}")
}

pub fn api_feature(api: &str) -> String {
    format!("api::{api}")
}

pub fn intent_feature(intent: &str) -> String {
    format!("intent::{intent}")
}

pub fn endpoint_feature(url: &str) -> String {
    format!("url::{url}")
}

pub fn component_feature(kind: super::ComponentKind, name: &str) -> String {
    format!("{kind}::{name}")
}

/// Every feature the program exhibits, independent of any vocabulary:
/// manifest capabilities, components, intents and endpoints plus each api
/// name that occurs statically in code.
pub fn feature_names(p: &Program) -> BTreeSet<String> {
    let m = &p.manifest;
    let mut out = BTreeSet::new();
    out.extend(m.capabilities.iter().map(|c| capability_feature(c)));
    out.extend(m.components.iter().map(|(n, k)| component_feature(*k, n)));
    out.extend(m.intents.iter().map(|i| intent_feature(i)));
    out.extend(m.endpoints.iter().map(|e| endpoint_feature(e)));
    out.extend(p.api_names().iter().map(|a| api_feature(a)));
    out
}

/// φ over a closed vocabulary; names outside it are ignored.
pub fn extract_features(p: &Program, vocab: &FeatureVocabulary) -> FeatureVector {
    let names = feature_names(p);
    FeatureVector::from_names(vocab, names.iter().map(String::as_str))
}
