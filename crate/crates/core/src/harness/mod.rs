//! Corpus generation, experiment orchestration and report emission.

mod config;
mod corpus;
mod experiment;
mod report;

use std::fmt;

use thiserror::Error;

pub use config::{AttackSettings, ExperimentConfig, TrainingConfig};
pub use corpus::{generate_corpus, split, ClassPool, Corpus, CorpusConfig, CorpusEntry, FeaturePools};
pub use experiment::{
    attack_omega, attack_setting, build_iceboxes, load_trained, run_attack_stage, run_experiment, samples_for,
    train_models, Harvested, ModelChoice, Setting, SettingResults, Trained, SETTINGS,
};
pub use report::{emit_report, load_report, ExperimentReport, ModelSummary, StatBand, REPORT_FILES};

/// Pipeline stages, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    GenCorpus,
    Train,
    Harvest,
    Attack,
    Report,
}

impl Stage {
    /// Process exit code reported when this stage fails.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::GenCorpus => 10,
            Stage::Train => 11,
            Stage::Harvest => 12,
            Stage::Attack => 13,
            Stage::Report => 14,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::GenCorpus => "gen-corpus",
            Stage::Train => "train",
            Stage::Harvest => "harvest",
            Stage::Attack => "attack",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn stage(stage: Stage, err: impl fmt::Display) -> Self {
        HarnessError::Stage { stage, message: err.to_string() }
    }

    /// Tag an untagged error with `stage`; already tagged errors keep theirs.
    pub fn within(self, stage: Stage) -> Self {
        match self {
            e @ HarnessError::Stage { .. } => e,
            other => HarnessError::stage(stage, other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Stage { stage, .. } => stage.exit_code(),
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}
