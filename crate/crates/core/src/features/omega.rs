//! Addition-only feature-space attack against a linear discriminant.

use std::collections::BTreeSet;

use super::{FeatureError, FeatureVector, LinearModel};

/// Feature-space constraints: which positions may be flipped 0→1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OmegaConstraints {
    pub addable: BTreeSet<usize>,
    /// Always false here; kept so the constraint set is explicit.
    pub removals_allowed: bool,
}

impl OmegaConstraints {
    pub fn addition_only(addable: impl IntoIterator<Item = usize>) -> Self {
        Self { addable: addable.into_iter().collect(), removals_allowed: false }
    }

    pub fn all(dim: usize) -> Self {
        Self::addition_only(0..dim)
    }

    /// `delta` only sets addable positions that are absent from `x`.
    pub fn admits(&self, x: &FeatureVector, delta: &FeatureVector) -> bool {
        delta.iter().all(|p| self.addable.contains(&p) && !x.contains(p))
    }
}

/// Confidence-adjusted objective. The target class is goodware, so the
/// attack succeeds iff `h(x) < -kappa`.
pub fn attack_objective(model: &LinearModel, x: &FeatureVector, kappa: f64) -> Result<f64, FeatureError> {
    if !(kappa >= 0.0) {
        return Err(FeatureError::NegativeKappa(kappa));
    }
    model.discriminant(x)
}

pub fn is_evasive(score: f64, kappa: f64) -> bool {
    score < -kappa
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureSpaceSolution {
    /// Minimum-cardinality perturbation and the score it reaches.
    Feasible { delta: FeatureVector, score: f64 },
    Infeasible { bound: f64 },
}

impl FeatureSpaceSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeatureSpaceSolution::Feasible { .. })
    }
}

/// Absent addable features with negative weight, most negative first.
fn helpful_candidates(model: &LinearModel, x: &FeatureVector, omega: &OmegaConstraints) -> Vec<usize> {
    let mut c: Vec<usize> = omega
        .addable
        .iter()
        .copied()
        .filter(|&i| i < model.dim() && !x.contains(i) && model.weights[i] < 0.0)
        .collect();
    c.sort_by(|&a, &b| model.weights[a].total_cmp(&model.weights[b]).then(a.cmp(&b)));
    c
}

/// Lowest reachable score under `omega`: `h(x)` plus every negative weight
/// among absent addable features.
pub fn feasibility_bound(
    model: &LinearModel,
    x: &FeatureVector,
    omega: &OmegaConstraints,
) -> Result<f64, FeatureError> {
    let h = model.discriminant(x)?;
    Ok(helpful_candidates(model, x, omega).iter().fold(h, |acc, &i| acc + model.weights[i]))
}

/// Greedy solver. Each added feature shifts a linear score independently, so
/// adding the most negative weights first reaches `h < -kappa` with the
/// fewest additions and, at that cardinality, the lowest score.
pub fn solve_feature_space_attack(
    model: &LinearModel,
    x: &FeatureVector,
    omega: &OmegaConstraints,
    kappa: f64,
) -> Result<FeatureSpaceSolution, FeatureError> {
    if omega.removals_allowed {
        return Err(FeatureError::Contract("feature removal is not supported".into()));
    }
    let mut score = attack_objective(model, x, kappa)?;
    let mut delta = FeatureVector::empty(x.dim());
    if is_evasive(score, kappa) {
        return Ok(FeatureSpaceSolution::Feasible { delta, score });
    }
    for i in helpful_candidates(model, x, omega) {
        delta.insert(i)?;
        score += model.weights[i];
        if is_evasive(score, kappa) {
            return Ok(FeatureSpaceSolution::Feasible { delta, score });
        }
    }
    Ok(FeatureSpaceSolution::Infeasible { bound: score })
}
