//! Experiment configuration, read from TOML. Every key is optional.
//!
//! ```toml
//! seed = 7            # master seed for split, training, harvest and attack
//! workers = 2         # attack worker threads
//! out_dir = "out"
//!
//! [corpus]            # see CorpusConfig
//! n_goodware = 2000
//! n_malware = 200
//! noise = 0.05
//!
//! [training]
//! train_fraction = 0.66
//! top_n = 1000        # feature selection; capped at the vocabulary size
//! c = 1.0
//! batch_size = 32
//! learning_rate = 0.05
//! epochs = 60
//! auroc_loss_budget = 0.02
//! detection_budget = 0.2  # max drop in detection rate at threshold zero
//!
//! [harvest]
//! n_features = 100
//! n_donors = 3
//! attempts_per_gadget = 4
//!
//! [attack]
//! max_new_capabilities = 1
//! rounds = 3
//! opaque_vars = 40
//! opaque_clauses = 184
//! fuel = 1000000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features::SgdConfig;
use crate::minilang::DEFAULT_FUEL;
use crate::opaque::OpaqueParams;
use crate::transplant::HarvestParams;

use super::corpus::CorpusConfig;
use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub train_fraction: f64,
    pub top_n: usize,
    pub c: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub auroc_loss_budget: f64,
    /// Allowed drop in test detection rate during the k sweep.
    pub detection_budget: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let sgd = SgdConfig::desk(0);
        Self {
            train_fraction: 0.66,
            top_n: 1000,
            c: sgd.c,
            batch_size: sgd.batch_size,
            learning_rate: sgd.learning_rate,
            epochs: sgd.epochs,
            auroc_loss_budget: 0.02,
            detection_budget: 0.2,
        }
    }
}

impl TrainingConfig {
    pub fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            c: self.c,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSettings {
    pub max_new_capabilities: usize,
    pub rounds: usize,
    pub opaque_vars: usize,
    pub opaque_clauses: usize,
    pub fuel: u64,
}

impl Default for AttackSettings {
    fn default() -> Self {
        let o = OpaqueParams::default();
        Self { max_new_capabilities: 1, rounds: 3, opaque_vars: o.n, opaque_clauses: o.m, fuel: DEFAULT_FUEL }
    }
}

impl AttackSettings {
    pub fn opaque(&self) -> OpaqueParams {
        OpaqueParams { n: self.opaque_vars, m: self.opaque_clauses, ..OpaqueParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub corpus: CorpusConfig,
    pub training: TrainingConfig,
    pub harvest: HarvestParams,
    pub attack: AttackSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            workers: 1,
            out_dir: PathBuf::from("out"),
            corpus: CorpusConfig::default(),
            training: TrainingConfig::default(),
            harvest: HarvestParams::default(),
            attack: AttackSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let t = &self.training;
        if !(t.train_fraction > 0.0 && t.train_fraction < 1.0) {
            return Err(HarnessError::Config("training.train_fraction must lie in (0, 1)".into()));
        }
        if !(t.auroc_loss_budget > 0.0 && t.auroc_loss_budget <= 1.0) {
            return Err(HarnessError::Config("training.auroc_loss_budget must lie in (0, 1]".into()));
        }
        if !(t.detection_budget > 0.0 && t.detection_budget <= 1.0) {
            return Err(HarnessError::Config("training.detection_budget must lie in (0, 1]".into()));
        }
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        if self.harvest.n_donors == 0 || self.harvest.n_features == 0 {
            return Err(HarnessError::Config("harvest sizes must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults_and_round_trips() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_sections_and_errors() {
        let cfg = ExperimentConfig::from_toml("seed = 3\n[corpus]\nn_goodware = 50\n[harvest]\nn_donors = 2\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.corpus.n_goodware, 50);
        assert_eq!(cfg.corpus.n_malware, 200);
        assert_eq!(cfg.harvest.n_donors, 2);
        assert!(ExperimentConfig::from_toml("[training]\ntrain_fraction = 1.5\n").is_err());
        assert!(ExperimentConfig::from_toml("[attack]\nbogus = 1\n").is_err());
    }
}
