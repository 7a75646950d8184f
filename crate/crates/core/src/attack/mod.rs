//! Greedy gadget selection against a linear detector, batch implantation and
//! constraint verification.

mod gamma;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    is_evasive, solve_feature_space_attack, FeatureError, FeatureSpaceSolution, FeatureVector,
    FeatureVocabulary, LinearModel, OmegaConstraints,
};
use crate::minilang::{extract_features, registry, Program, TestInput, DEFAULT_FUEL};
use crate::opaque::OpaqueParams;
use crate::transplant::{implant_with, Gadget, IceBox, TransplantError};

pub use gamma::{additions_only, plausible, robust, same_behaviour, verify_gamma, Constraint, GammaReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Confidence {
    /// Cross the decision boundary.
    Low,
    /// Reach `h < -kappa`.
    High(f64),
}

impl Confidence {
    pub fn kappa(self) -> f64 {
        match self {
            Confidence::Low => 0.0,
            Confidence::High(k) => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackConfig {
    pub confidence: Confidence,
    pub max_new_capabilities: usize,
    pub dangerous: BTreeSet<String>,
    pub upsilon_inputs: Vec<TestInput>,
    pub fuel: u64,
    /// Selection/implantation rounds before giving up on realized scores.
    pub rounds: usize,
    pub opaque: OpaqueParams,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            confidence: Confidence::Low,
            max_new_capabilities: 1,
            dangerous: registry::dangerous_capabilities().map(str::to_string).collect(),
            upsilon_inputs: (0..8).map(|i| TestInput { input: i, seed: i as u64 }).collect(),
            fuel: DEFAULT_FUEL,
            rounds: 3,
            opaque: OpaqueParams::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("sample is not detected (score {0})")]
    NotDetected(f64),
    #[error(transparent)]
    Transplant(#[from] TransplantError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// A gadget with its contribution to a particular host.
#[derive(Clone, Debug)]
pub struct Candidate<'a> {
    pub gadget: &'a Gadget,
    /// Features the gadget would add to the host.
    pub delta: FeatureVector,
    /// `w · delta`.
    pub score: f64,
}

/// Gadgets ordered by their contribution `w · (r ∧ ¬x)`, most negative
/// first; ties prefer fewer estimated features, then the smaller id.
/// Gadgets whose target feature is already in `x` are left out.
pub fn rank_gadgets<'a>(
    icebox: &'a IceBox,
    x: &FeatureVector,
    model: &LinearModel,
) -> Result<Vec<Candidate<'a>>, AttackError> {
    icebox.check_model(model)?;
    let mut out = Vec::new();
    for g in icebox.gadgets() {
        if x.contains(g.target_feature) {
            continue;
        }
        let delta = g.r.difference(x)?;
        let score = model.dot(&delta);
        out.push(Candidate { gadget: g, delta, score });
    }
    out.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.gadget.r.len().cmp(&b.gadget.r.len()))
            .then(a.gadget.id.cmp(&b.gadget.id))
    });
    Ok(out)
}

/// A gadget may add at most `max_new_capabilities` capabilities the host
/// lacks, none of them dangerous.
pub fn check_feasibility(host_capabilities: &BTreeSet<String>, g: &Gadget, cfg: &AttackConfig) -> bool {
    let new: Vec<&String> = g.new_capabilities(host_capabilities).collect();
    new.len() <= cfg.max_new_capabilities && new.iter().all(|c| !cfg.dangerous.contains(*c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfeasibleReason {
    /// No addable features can push the score far enough.
    FeatureSpace,
    /// The ice-box ran out of usable gadgets.
    IceBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum AttackOutcome {
    Success,
    Infeasible { reason: InfeasibleReason, bound: f64 },
    ImplantError { message: String },
    ConstraintViolation { constraint: Constraint },
}

/// One applied implantation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transformation {
    pub gadget: String,
    pub function: String,
    pub index: usize,
    pub round: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub sample: String,
    #[serde(flatten)]
    pub outcome: AttackOutcome,
    pub score_before: f64,
    pub score_after: f64,
    /// Score the feature-space simulation predicted for the chosen gadgets.
    pub score_simulated: f64,
    pub kappa: f64,
    pub features_added: usize,
    pub gadgets_used: Vec<String>,
    pub transformations: Vec<Transformation>,
    pub rounds: usize,
    pub gamma: Option<GammaReport>,
    pub wall_time_ms: f64,
    #[serde(skip)]
    pub adversarial: Option<Program>,
    /// DIMACS text of every guard inserted, in transformation order.
    #[serde(skip)]
    pub predicates: Vec<String>,
}

impl AttackResult {
    pub fn is_success(&self) -> bool {
        self.outcome == AttackOutcome::Success
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable result")
    }
}

/// Greedy selection over ranked gadgets, one batch implantation per round,
/// re-extraction of the realized features and verification of every
/// constraint.
#[allow(clippy::too_many_arguments)]
pub fn run_attack(
    sample: &str,
    z: &Program,
    model: &LinearModel,
    vocab: &FeatureVocabulary,
    icebox: &IceBox,
    omega: &OmegaConstraints,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<AttackResult, AttackError> {
    let start = Instant::now();
    model.check_vocab(vocab)?;
    let kappa = cfg.confidence.kappa();
    let x0 = extract_features(z, vocab);
    let h0 = model.discriminant(&x0)?;
    if h0 <= 0.0 {
        return Err(AttackError::NotDetected(h0));
    }
    let mut result = AttackResult {
        sample: sample.to_string(),
        outcome: AttackOutcome::Success,
        score_before: h0,
        score_after: h0,
        score_simulated: h0,
        kappa,
        features_added: 0,
        gadgets_used: Vec::new(),
        transformations: Vec::new(),
        rounds: 0,
        gamma: None,
        wall_time_ms: 0.0,
        adversarial: None,
        predicates: Vec::new(),
    };
    let finish = |mut r: AttackResult, outcome: AttackOutcome| {
        r.outcome = outcome;
        r.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(r)
    };

    if let FeatureSpaceSolution::Infeasible { bound } = solve_feature_space_attack(model, &x0, omega, kappa)? {
        return finish(result, AttackOutcome::Infeasible { reason: InfeasibleReason::FeatureSpace, bound });
    }

    let ranked = rank_gadgets(icebox, &x0, model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut program = z.clone();
    let mut x = x0.clone();
    let mut used: BTreeSet<&str> = BTreeSet::new();

    for round in 1..=cfg.rounds.max(1) {
        result.rounds = round;
        let mut capabilities = program.manifest.capabilities.clone();
        let mut simulated = x.clone();
        let mut score = model.discriminant(&simulated)?;
        let mut batch: Vec<&Gadget> = Vec::new();
        for c in &ranked {
            if is_evasive(score, kappa) {
                break;
            }
            let g = c.gadget;
            if used.contains(g.id.as_str()) || simulated.contains(g.target_feature) {
                continue;
            }
            if !check_feasibility(&capabilities, g, cfg) {
                continue;
            }
            let delta = g.r.difference(&simulated)?;
            if !delta.iter().all(|p| omega.addable.contains(&p)) {
                continue;
            }
            let gain = model.dot(&delta);
            if gain >= 0.0 {
                continue;
            }
            simulated = simulated.union(&delta)?;
            score += gain;
            capabilities.extend(g.manifest_delta.capabilities.iter().cloned());
            used.insert(&g.id);
            batch.push(g);
        }
        if batch.is_empty() {
            let bound = model.discriminant(&x)?;
            return finish(result, AttackOutcome::Infeasible { reason: InfeasibleReason::IceBox, bound });
        }
        result.score_simulated = score;

        for g in batch {
            let imp = match implant_with(&program, g, rng.gen(), &cfg.opaque) {
                Ok(imp) => imp,
                Err(e) => return finish(result, AttackOutcome::ImplantError { message: e.to_string() }),
            };
            result.transformations.push(Transformation {
                gadget: g.id.clone(),
                function: imp.function.to_string(),
                index: imp.index,
                round,
            });
            result.predicates.push(imp.predicate.to_dimacs());
            result.gadgets_used.push(g.id.clone());
            program = imp.program;
        }

        x = extract_features(&program, vocab);
        let realized = x.difference(&x0)?;
        result.features_added = realized.len();
        result.score_after = model.discriminant(&x)?;
        result.adversarial = Some(program.clone());
        if !realized.iter().all(|p| omega.addable.contains(&p)) {
            return finish(result, AttackOutcome::ConstraintViolation { constraint: Constraint::Transformations });
        }
        if is_evasive(result.score_after, kappa) {
            let report = verify_gamma(z, &program, &cfg.upsilon_inputs, cfg.fuel);
            let outcome = match report.first_violation() {
                None => AttackOutcome::Success,
                Some(constraint) => AttackOutcome::ConstraintViolation { constraint },
            };
            result.gamma = Some(report);
            return finish(result, outcome);
        }
    }
    let bound = result.score_after;
    finish(result, AttackOutcome::Infeasible { reason: InfeasibleReason::IceBox, bound })
}

#[cfg(test)]
mod tests;
