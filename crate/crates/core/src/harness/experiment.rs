//! Train → harvest → attack, in memory or stage by stage through an output
//! directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{run_attack, AttackConfig, AttackError, AttackResult, Confidence};
use crate::features::{
    auroc, feature_select_topn, grid_search_k_with_floor, quantile, train_secsvm, train_svm_with, FeatureFamily,
    FeatureVector, FeatureVocabulary, GridSearchResult, LinearModel, OmegaConstraints, Sample,
};
use crate::minilang::{extract_features, feature_names, stats};
use crate::transplant::{build_icebox, HarvestLog, IceBox};

use super::config::ExperimentConfig;
use super::corpus::{generate_corpus, split, Corpus};
use super::report::{ExperimentReport, ModelSummary};
use super::{HarnessError, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Svm,
    SecSvm,
}

impl ModelChoice {
    pub fn label(self) -> &'static str {
        match self {
            ModelChoice::Svm => "SVM",
            ModelChoice::SecSvm => "SecSVM",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ModelChoice::Svm => "svm",
            ModelChoice::SecSvm => "secsvm",
        }
    }
}

/// One attack configuration: target model and confidence level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setting {
    pub model: ModelChoice,
    pub high_confidence: bool,
}

impl Setting {
    /// `SVM(L)`, `SecSVM(H)` and so on.
    pub fn label(&self) -> String {
        format!("{}({})", self.model.label(), if self.high_confidence { "H" } else { "L" })
    }

    /// File-system friendly form of the label.
    pub fn slug(&self) -> String {
        format!("{}-{}", self.model.slug(), if self.high_confidence { "h" } else { "l" })
    }
}

pub const SETTINGS: [Setting; 4] = [
    Setting { model: ModelChoice::Svm, high_confidence: false },
    Setting { model: ModelChoice::Svm, high_confidence: true },
    Setting { model: ModelChoice::SecSvm, high_confidence: false },
    Setting { model: ModelChoice::SecSvm, high_confidence: true },
];

/// Independent seed for a sub-task.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.gen()
}

const STREAM_TRAIN: u64 = 1;
const STREAM_HARVEST: u64 = 2;
const STREAM_ATTACK: u64 = 1 << 32;

/// Trained detectors and everything derived from the split.
#[derive(Clone, Debug)]
pub struct Trained {
    pub vocab: FeatureVocabulary,
    pub svm: LinearModel,
    pub secsvm: LinearModel,
    pub grid: GridSearchResult,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub kappa_svm: f64,
    pub kappa_secsvm: f64,
}

#[derive(Serialize, Deserialize)]
struct TrainingFile {
    train: Vec<usize>,
    test: Vec<usize>,
    grid: GridSearchResult,
    kappa_svm: f64,
    kappa_secsvm: f64,
}

impl Trained {
    pub fn model(&self, m: ModelChoice) -> &LinearModel {
        match m {
            ModelChoice::Svm => &self.svm,
            ModelChoice::SecSvm => &self.secsvm,
        }
    }

    pub fn kappa(&self, m: ModelChoice) -> f64 {
        match m {
            ModelChoice::Svm => self.kappa_svm,
            ModelChoice::SecSvm => self.kappa_secsvm,
        }
    }

    /// `vocab.txt` (one feature per line), `svm.json`, `secsvm.json` and
    /// `training.json` (split, grid search, confidence thresholds).
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        let mut names: String = self.vocab.names().collect::<Vec<_>>().join("\n");
        names.push('\n');
        fs::write(dir.join("vocab.txt"), names)?;
        fs::write(dir.join("svm.json"), self.svm.to_json())?;
        fs::write(dir.join("secsvm.json"), self.secsvm.to_json())?;
        let file = TrainingFile {
            train: self.train.clone(),
            test: self.test.clone(),
            grid: self.grid.clone(),
            kappa_svm: self.kappa_svm,
            kappa_secsvm: self.kappa_secsvm,
        };
        fs::write(dir.join("training.json"), serde_json::to_string_pretty(&file).expect("serializable"))?;
        Ok(())
    }
}

pub fn load_trained(dir: &Path) -> Result<Trained, HarnessError> {
    let bad = |e: &dyn std::fmt::Display| HarnessError::stage(Stage::Train, e);
    let names = fs::read_to_string(dir.join("vocab.txt"))?;
    let vocab = FeatureVocabulary::new(names.lines().filter(|l| !l.is_empty())).map_err(|e| bad(&e))?;
    let svm = LinearModel::load(&dir.join("svm.json")).map_err(|e| bad(&e))?;
    let secsvm = LinearModel::load(&dir.join("secsvm.json")).map_err(|e| bad(&e))?;
    for m in [&svm, &secsvm] {
        m.check_vocab(&vocab).map_err(|e| bad(&e))?;
    }
    let file: TrainingFile =
        serde_json::from_str(&fs::read_to_string(dir.join("training.json"))?).map_err(|e| bad(&e))?;
    Ok(Trained {
        vocab,
        svm,
        secsvm,
        grid: file.grid,
        train: file.train,
        test: file.test,
        kappa_svm: file.kappa_svm,
        kappa_secsvm: file.kappa_secsvm,
    })
}

pub fn samples_for(corpus: &Corpus, idx: &[usize], vocab: &FeatureVocabulary) -> Vec<Sample> {
    idx.iter()
        .map(|&i| {
            let e = &corpus.entries[i];
            Sample { x: extract_features(&e.program, vocab), malware: e.malware }
        })
        .collect()
}

/// |25th percentile| of the benign training scores.
fn high_confidence_kappa(model: &LinearModel, train: &[Sample]) -> f64 {
    let scores: Vec<f64> = train
        .iter()
        .filter(|s| !s.malware)
        .map(|s| model.discriminant(&s.x).expect("shared vocabulary"))
        .collect();
    quantile(&scores, 0.25).abs()
}

/// Split, build the vocabulary from the training side, select features and
/// train both detectors. The Sec-SVM bound comes from the grid search.
pub fn train_models(corpus: &Corpus, cfg: &ExperimentConfig) -> Result<Trained, HarnessError> {
    let err = |e: crate::features::FeatureError| HarnessError::stage(Stage::Train, e);
    let (train, test) = split(corpus, cfg.training.train_fraction, cfg.seed)?;
    let sgd = cfg.training.sgd(sub_seed(cfg.seed, STREAM_TRAIN));

    let mut names: BTreeSet<String> = BTreeSet::new();
    for &i in &train {
        names.extend(feature_names(&corpus.entries[i].program));
    }
    let full = FeatureVocabulary::new(names).map_err(err)?;
    let full_samples = samples_for(corpus, &train, &full);
    let n = cfg.training.top_n.min(full.len());
    let (vocab, _) = feature_select_topn(&full_samples, &full, n, &sgd).map_err(err)?;

    let train_samples = samples_for(corpus, &train, &vocab);
    let test_samples = samples_for(corpus, &test, &vocab);
    let svm = train_svm_with(&train_samples, &vocab, &sgd).map_err(err)?;
    let grid = grid_search_k_with_floor(
        &train_samples,
        &test_samples,
        &vocab,
        &sgd,
        cfg.training.auroc_loss_budget,
        Some(cfg.training.detection_budget),
    ).map_err(err)?;
    let secsvm = train_secsvm(&train_samples, &vocab, &sgd, grid.k).map_err(err)?;
    info!(
        "trained on {} programs over {} features; sec-svm k = {:.4}",
        train.len(),
        vocab.len(),
        grid.k
    );
    Ok(Trained {
        kappa_svm: high_confidence_kappa(&svm, &train_samples),
        kappa_secsvm: high_confidence_kappa(&secsvm, &train_samples),
        vocab,
        svm,
        secsvm,
        grid,
        train,
        test,
    })
}

/// Ice-boxes for both detectors, harvested from the training goodware.
#[derive(Clone, Debug)]
pub struct Harvested {
    pub svm: IceBox,
    pub secsvm: IceBox,
    pub log_svm: HarvestLog,
    pub log_secsvm: HarvestLog,
}

impl Harvested {
    pub fn icebox(&self, m: ModelChoice) -> &IceBox {
        match m {
            ModelChoice::Svm => &self.svm,
            ModelChoice::SecSvm => &self.secsvm,
        }
    }

    pub fn log(&self, m: ModelChoice) -> &HarvestLog {
        match m {
            ModelChoice::Svm => &self.log_svm,
            ModelChoice::SecSvm => &self.log_secsvm,
        }
    }

    pub fn save(&self, dir: &Path, vocab: &FeatureVocabulary) -> Result<(), HarnessError> {
        let err = |e: crate::transplant::TransplantError| HarnessError::stage(Stage::Harvest, e);
        for m in [ModelChoice::Svm, ModelChoice::SecSvm] {
            let sub = dir.join(m.slug());
            self.icebox(m).save(&sub, vocab).map_err(err)?;
            fs::write(sub.join("harvest.json"), serde_json::to_string_pretty(self.log(m)).expect("serializable"))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, trained: &Trained) -> Result<Self, HarnessError> {
        let err = |e: &dyn std::fmt::Display| HarnessError::stage(Stage::Harvest, e);
        let mut boxes = Vec::new();
        for m in [ModelChoice::Svm, ModelChoice::SecSvm] {
            let sub = dir.join(m.slug());
            let ib = IceBox::load(&sub, &trained.vocab).map_err(|e| err(&e))?;
            ib.check_model(trained.model(m)).map_err(|e| err(&e))?;
            let log: HarvestLog =
                serde_json::from_str(&fs::read_to_string(sub.join("harvest.json"))?).map_err(|e| err(&e))?;
            boxes.push((ib, log));
        }
        let (secsvm, log_secsvm) = boxes.pop().expect("two models");
        let (svm, log_svm) = boxes.pop().expect("two models");
        Ok(Self { svm, secsvm, log_svm, log_secsvm })
    }
}

pub fn build_iceboxes(corpus: &Corpus, trained: &Trained, cfg: &ExperimentConfig) -> Result<Harvested, HarnessError> {
    let donors: Vec<(String, crate::minilang::Program)> = trained
        .train
        .iter()
        .map(|&i| &corpus.entries[i])
        .filter(|e| !e.malware)
        .map(|e| (e.id.clone(), e.program.clone()))
        .collect();
    let seed = sub_seed(cfg.seed, STREAM_HARVEST);
    let harvest = |m: &LinearModel| {
        build_icebox(&donors, m, &trained.vocab, &cfg.harvest, seed).map_err(|e| HarnessError::stage(Stage::Harvest, e))
    };
    let (svm, log_svm) = harvest(&trained.svm)?;
    let (secsvm, log_secsvm) = harvest(&trained.secsvm)?;
    info!("ice-boxes: {} gadgets (svm), {} gadgets (sec-svm)", svm.len(), secsvm.len());
    Ok(Harvested { svm, secsvm, log_svm, log_secsvm })
}

/// Results of one setting over its true-positive test malware.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingResults {
    pub setting: Setting,
    pub kappa: f64,
    /// Test malware the detector flagged, i.e. the attacked samples.
    pub true_positives: usize,
    /// Test malware scored at or below zero, never attacked.
    pub false_negatives: usize,
    pub results: Vec<AttackResult>,
}

impl SettingResults {
    pub fn successes(&self) -> impl Iterator<Item = &AttackResult> {
        self.results.iter().filter(|r| r.is_success())
    }

    pub fn implant_errors(&self) -> usize {
        self.results
            .iter()
            .filter(|r| matches!(r.outcome, crate::attack::AttackOutcome::ImplantError { .. }))
            .count()
    }
}

/// Addable positions: everything except intents, which are never harvested.
pub fn attack_omega(vocab: &FeatureVocabulary) -> OmegaConstraints {
    OmegaConstraints::addition_only(
        (0..vocab.len()).filter(|&p| vocab.family(p) != FeatureFamily::Intent),
    )
}

pub fn attack_setting(
    setting: Setting,
    index: usize,
    corpus: &Corpus,
    trained: &Trained,
    harvested: &Harvested,
    cfg: &ExperimentConfig,
) -> Result<SettingResults, HarnessError> {
    let model = trained.model(setting.model);
    let icebox = harvested.icebox(setting.model);
    let kappa = if setting.high_confidence { trained.kappa(setting.model) } else { 0.0 };
    let omega = attack_omega(&trained.vocab);
    let malware: Vec<usize> = trained.test.iter().copied().filter(|&i| corpus.entries[i].malware).collect();
    let scored: Vec<(usize, f64)> = malware
        .iter()
        .map(|&i| {
            let x: FeatureVector = extract_features(&corpus.entries[i].program, &trained.vocab);
            (i, model.discriminant(&x).expect("shared vocabulary"))
        })
        .collect();
    let targets: Vec<usize> = scored.iter().filter(|(_, h)| *h > 0.0).map(|(i, _)| *i).collect();

    let base = AttackConfig {
        confidence: if setting.high_confidence { Confidence::High(kappa) } else { Confidence::Low },
        max_new_capabilities: cfg.attack.max_new_capabilities,
        fuel: cfg.attack.fuel,
        rounds: cfg.attack.rounds,
        opaque: cfg.attack.opaque(),
        ..AttackConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::stage(Stage::Attack, e))?;
    let results: Vec<Result<AttackResult, AttackError>> = pool.install(|| {
        targets
            .par_iter()
            .map(|&i| {
                let e = &corpus.entries[i];
                let ac = AttackConfig { upsilon_inputs: e.upsilon.clone(), ..base.clone() };
                let seed = sub_seed(cfg.seed, STREAM_ATTACK + (index as u64) * (1 << 24) + i as u64);
                run_attack(&e.id, &e.program, model, &trained.vocab, icebox, &omega, &ac, seed)
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>().map_err(|e| HarnessError::stage(Stage::Attack, e))?;
    let done = results.iter().filter(|r| r.is_success()).count();
    info!("{}: {done}/{} evasive", setting.label(), results.len());
    Ok(SettingResults {
        setting,
        kappa,
        true_positives: targets.len(),
        false_negatives: malware.len() - targets.len(),
        results,
    })
}

pub fn run_attack_stage(
    corpus: &Corpus,
    trained: &Trained,
    harvested: &Harvested,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, HarnessError> {
    let settings = SETTINGS
        .iter()
        .enumerate()
        .map(|(k, s)| attack_setting(*s, k, corpus, trained, harvested, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_report(corpus, trained, harvested, cfg, settings)
}

fn assemble_report(
    corpus: &Corpus,
    trained: &Trained,
    harvested: &Harvested,
    cfg: &ExperimentConfig,
    settings: Vec<SettingResults>,
) -> Result<ExperimentReport, HarnessError> {
    let err = |e: crate::features::FeatureError| HarnessError::stage(Stage::Report, e);
    let test = samples_for(corpus, &trained.test, &trained.vocab);
    let labels: Vec<bool> = test.iter().map(|s| s.malware).collect();
    let mut models = Vec::new();
    for m in [ModelChoice::Svm, ModelChoice::SecSvm] {
        let model = trained.model(m);
        let scores: Vec<f64> = test.iter().map(|s| model.discriminant(&s.x)).collect::<Result<_, _>>().map_err(err)?;
        let log = harvested.log(m);
        models.push(ModelSummary {
            model: m,
            auroc: auroc(model, &test).map_err(err)?,
            roc: crate::features::roc_curve(&scores, &labels).map_err(err)?,
            clip_k: model.clip_k,
            max_abs_weight: model.max_abs_weight(),
            weight_entropy: crate::features::weight_entropy(&model.weights),
            kappa: trained.kappa(m),
            icebox_gadgets: harvested.icebox(m).len(),
            features_without_donors: log.features_without_donors.len(),
        });
    }
    let stats_of = |malware: bool| {
        trained
            .test
            .iter()
            .map(|&i| &corpus.entries[i])
            .filter(|e| e.malware == malware)
            .map(|e| stats(&e.program))
            .collect()
    };
    Ok(ExperimentReport {
        seed: cfg.seed,
        corpus_size: corpus.len(),
        train_size: trained.train.len(),
        test_size: trained.test.len(),
        vocabulary_size: trained.vocab.len(),
        models,
        benign_stats: stats_of(false),
        malware_stats: stats_of(true),
        settings,
    })
}

/// Full pipeline in memory: corpus, training, harvest, attacks, report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let corpus = generate_corpus(&cfg.corpus).map_err(|e| e.within(Stage::GenCorpus))?;
    let trained = train_models(&corpus, cfg).map_err(|e| e.within(Stage::Train))?;
    let harvested = build_iceboxes(&corpus, &trained, cfg)?;
    run_attack_stage(&corpus, &trained, &harvested, cfg)
}
