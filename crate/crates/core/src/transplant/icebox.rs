//! Harvest of gadgets for the most benign features and their on-disk store.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureVector, FeatureVocabulary, LinearModel};
use crate::minilang::{
    extract_features, feature_names, parse, render, Program, SoftwareStats, StmtRef,
};

use super::gadget::{extract_gadget, Gadget, VEIN_CLASS, VEIN_FUNCTION};
use super::implant::implant;
use super::TransplantError;

/// Seed used for every side-effect measurement on the minimal host.
const ESTIMATE_SEED: u64 = 0;

/// Features gained by implanting `g` into `z_min`, i.e. everything beyond the
/// minimal host's own features.
pub fn estimate_side_effects(
    g: &Gadget,
    z_min: &Program,
    vocab: &FeatureVocabulary,
) -> Result<FeatureVector, TransplantError> {
    let base = extract_features(z_min, vocab);
    let z = implant(z_min, g, ESTIMATE_SEED)?;
    Ok(extract_features(&z, vocab).difference(&base).expect("same vocabulary"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarvestParams {
    /// Number of most-negative-weight features to harvest for.
    pub n_features: usize,
    /// Gadgets kept per feature.
    pub n_donors: usize,
    /// Donor draws per feature are capped at this multiple of `n_donors`.
    pub attempts_per_gadget: usize,
}

impl Default for HarvestParams {
    fn default() -> Self {
        Self { n_features: 100, n_donors: 3, attempts_per_gadget: 4 }
    }
}

impl HarvestParams {
    pub fn paper() -> Self {
        Self { n_features: 500, n_donors: 5, attempts_per_gadget: 4 }
    }
}

/// Gadgets grouped by the feature they were harvested for.
#[derive(Clone, Debug, PartialEq)]
pub struct IceBox {
    pub entries: BTreeMap<usize, Vec<Gadget>>,
    /// Fingerprint of the model the discard rule was applied with.
    pub model_fingerprint: String,
    pub vocab_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HarvestLog {
    pub features_considered: usize,
    pub features_without_donors: Vec<String>,
    pub extracted: usize,
    pub discarded_positive: usize,
    pub failed: usize,
}

impl IceBox {
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All gadgets, by feature position then harvest order.
    pub fn gadgets(&self) -> impl Iterator<Item = &Gadget> {
        self.entries.values().flatten()
    }

    pub fn get(&self, id: &str) -> Option<&Gadget> {
        self.gadgets().find(|g| g.id == id)
    }

    pub fn check_model(&self, model: &LinearModel) -> Result<(), TransplantError> {
        if model.fingerprint() == self.model_fingerprint {
            Ok(())
        } else {
            Err(TransplantError::StaleIceBox)
        }
    }

    /// Every stored gadget satisfies the discard rule under `model`.
    pub fn is_sound(&self, model: &LinearModel) -> bool {
        self.gadgets().all(|g| model.discriminant(&g.r).is_ok_and(|h| h <= 0.0))
    }
}

/// Harvest gadgets for the `n_features` most negative features of `model`
/// from randomly drawn donors exhibiting each feature; gadgets whose
/// estimated features score above zero are discarded.
pub fn build_icebox(
    donors: &[(String, Program)],
    model: &LinearModel,
    vocab: &FeatureVocabulary,
    params: &HarvestParams,
    seed: u64,
) -> Result<(IceBox, HarvestLog), TransplantError> {
    model.check_vocab(vocab).map_err(|_| TransplantError::StaleIceBox)?;
    let z_min = crate::minilang::minimal_program();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..model.dim()).collect();
    order.sort_by(|&a, &b| model.weights[a].total_cmp(&model.weights[b]).then(a.cmp(&b)));
    let chosen: Vec<usize> = order
        .into_iter()
        .take(params.n_features)
        .filter(|&i| model.weights[i] < 0.0)
        .collect();

    let donor_features: Vec<BTreeSet<String>> = donors.iter().map(|(_, p)| feature_names(p)).collect();
    let mut log = HarvestLog { features_considered: chosen.len(), ..HarvestLog::default() };
    let mut entries = BTreeMap::new();
    for i in chosen {
        let name = vocab.name(i);
        let mut eligible: Vec<usize> = (0..donors.len()).filter(|&d| donor_features[d].contains(name)).collect();
        if eligible.is_empty() {
            info!("no donor exhibits {name}");
            log.features_without_donors.push(name.to_string());
            entries.insert(i, Vec::new());
            continue;
        }
        eligible.shuffle(&mut rng);
        let budget = params.n_donors * params.attempts_per_gadget.max(1);
        let mut kept = Vec::new();
        for &d in eligible.iter().take(budget) {
            if kept.len() >= params.n_donors {
                break;
            }
            let (donor_id, donor) = &donors[d];
            let mut g = match extract_gadget(donor, donor_id, name, i) {
                Ok(g) => g,
                Err(e) => {
                    debug!("{name} from {donor_id}: {e}");
                    log.failed += 1;
                    continue;
                }
            };
            log.extracted += 1;
            g.r = match estimate_side_effects(&g, &z_min, vocab) {
                Ok(r) => r,
                Err(e) => {
                    debug!("{name} from {donor_id}: {e}");
                    log.failed += 1;
                    continue;
                }
            };
            let h = model.discriminant(&g.r).expect("vocabulary checked");
            if h > 0.0 || !g.r.contains(i) {
                log.discarded_positive += 1;
                continue;
            }
            kept.push(g);
        }
        entries.insert(i, kept);
    }
    let icebox = IceBox { entries, model_fingerprint: model.fingerprint(), vocab_hash: vocab.hash() };
    Ok((icebox, log))
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    model_fingerprint: String,
    vocab_hash: String,
    features: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct GadgetRecord {
    id: String,
    donor: String,
    target_feature: usize,
    target_name: String,
    entry_point: StmtRef,
    adapted_vein: bool,
    features: Vec<String>,
}

impl IceBox {
    /// One `<id>.mini`, `<id>.features.json` and `<id>.stats.json` per gadget
    /// plus `index.json`.
    pub fn save(&self, dir: &Path, vocab: &FeatureVocabulary) -> Result<(), TransplantError> {
        fs::create_dir_all(dir)?;
        let mut features = BTreeMap::new();
        for (i, gs) in &self.entries {
            features.insert(i.to_string(), gs.iter().map(|g| g.id.clone()).collect());
            for g in gs {
                fs::write(dir.join(format!("{}.mini", g.id)), render(&g.as_program()))?;
                let rec = GadgetRecord {
                    id: g.id.clone(),
                    donor: g.donor.clone(),
                    target_feature: g.target_feature,
                    target_name: g.target_name.clone(),
                    entry_point: g.entry_point.clone(),
                    adapted_vein: g.adapted_vein,
                    features: g.r.names(vocab).into_iter().map(str::to_string).collect(),
                };
                fs::write(dir.join(format!("{}.features.json", g.id)), to_json(&rec))?;
                fs::write(dir.join(format!("{}.stats.json", g.id)), to_json(&g.stats))?;
            }
        }
        let index = IndexFile {
            model_fingerprint: self.model_fingerprint.clone(),
            vocab_hash: self.vocab_hash.clone(),
            features,
        };
        fs::write(dir.join("index.json"), to_json(&index))?;
        Ok(())
    }

    pub fn load(dir: &Path, vocab: &FeatureVocabulary) -> Result<Self, TransplantError> {
        let index: IndexFile = from_json(&fs::read_to_string(dir.join("index.json"))?)?;
        if index.vocab_hash != vocab.hash() {
            return Err(TransplantError::StaleIceBox);
        }
        let mut entries = BTreeMap::new();
        for (pos, ids) in index.features {
            let pos: usize = pos.parse().map_err(|_| TransplantError::Store(format!("bad feature key {pos}")))?;
            let mut gs = Vec::new();
            for id in ids {
                let text = fs::read_to_string(dir.join(format!("{id}.mini")))?;
                let program = parse(&text).map_err(|e| TransplantError::Store(format!("{id}: {e}")))?;
                let rec: GadgetRecord = from_json(&fs::read_to_string(dir.join(format!("{id}.features.json")))?)?;
                let stats: SoftwareStats = from_json(&fs::read_to_string(dir.join(format!("{id}.stats.json")))?)?;
                let vein = program
                    .class(VEIN_CLASS)
                    .and_then(|c| c.function(VEIN_FUNCTION))
                    .ok_or_else(|| TransplantError::Store(format!("{id}: missing vein")))?
                    .body
                    .clone();
                let organ = program.classes.iter().filter(|c| c.name != VEIN_CLASS).cloned().collect();
                gs.push(Gadget {
                    id: rec.id,
                    donor: rec.donor,
                    target_feature: rec.target_feature,
                    target_name: rec.target_name,
                    entry_point: rec.entry_point,
                    organ,
                    vein,
                    adapted_vein: rec.adapted_vein,
                    manifest_delta: program.manifest,
                    r: FeatureVector::from_names(vocab, rec.features.iter().map(String::as_str)),
                    stats,
                });
            }
            entries.insert(pos, gs);
        }
        Ok(IceBox { entries, model_fingerprint: index.model_fingerprint, vocab_hash: index.vocab_hash })
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable record")
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, TransplantError> {
    serde_json::from_str(text).map_err(|e| TransplantError::Store(e.to_string()))
}
