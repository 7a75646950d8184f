use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::features::{FeatureVocabulary, LinearModel};
use crate::minilang::{feature_names, minimal_program, parse, Expr, Manifest, SoftwareStats, Stmt, StmtRef};
use crate::minilang::CallTarget;

/// Vocabulary of `dim` log apis plus the minimal host's features.
fn vocab(dim: usize) -> FeatureVocabulary {
    let mut names: BTreeSet<String> = feature_names(&minimal_program());
    names.extend((0..dim).map(|i| format!("api::log.w{i}")));
    FeatureVocabulary::new(names).unwrap()
}

fn host_with(present: &[usize]) -> Program {
    let body: String = present.iter().map(|i| format!("    api log.w{i}(input);\n")).collect();
    parse(&format!(
        "manifest {{\n  component activity MainActivity\n}}\nentry MainActivity.main\n\nclass MainActivity {{\n  fn main(input) {{\n{body}    return input;\n  }}\n}}\n"
    ))
    .unwrap()
}

/// Gadget adding exactly `api::log.w{i}` and the listed extra apis.
fn api_gadget(v: &FeatureVocabulary, i: usize, extra: &[usize]) -> Gadget {
    let mut vein = vec![Stmt::Api(format!("log.w{i}"), vec![Expr::Int(0)])];
    vein.extend(extra.iter().map(|j| Stmt::Api(format!("log.w{j}"), vec![Expr::Int(0)])));
    let pos = v.position(&format!("api::log.w{i}")).unwrap();
    let names: Vec<String> = std::iter::once(i).chain(extra.iter().copied()).map(|k| format!("api::log.w{k}")).collect();
    Gadget {
        id: format!("g{pos}-fixture"),
        donor: "fixture".into(),
        target_feature: pos,
        target_name: format!("api::log.w{i}"),
        entry_point: StmtRef { function: CallTarget::new("D", "f"), path: vec![0] },
        organ: Vec::new(),
        vein,
        adapted_vein: false,
        manifest_delta: Manifest::default(),
        r: FeatureVector::from_names(v, names.iter().map(String::as_str)),
        stats: SoftwareStats::default(),
    }
}

fn icebox(model: &LinearModel, v: &FeatureVocabulary, gadgets: Vec<Gadget>) -> IceBox {
    let mut entries: BTreeMap<usize, Vec<Gadget>> = BTreeMap::new();
    for g in gadgets {
        entries.entry(g.target_feature).or_default().push(g);
    }
    IceBox { entries, model_fingerprint: model.fingerprint(), vocab_hash: v.hash() }
}

fn api_pos(v: &FeatureVocabulary, i: usize) -> usize {
    v.position(&format!("api::log.w{i}")).unwrap()
}

#[test]
fn ranking_orders_by_contribution() {
    let v = vocab(3);
    let mut w = vec![0.0; v.len()];
    w[api_pos(&v, 0)] = -0.5;
    w[api_pos(&v, 1)] = -2.0;
    w[api_pos(&v, 2)] = 1.0;
    let m = LinearModel::new(w, 1.0, &v);
    let ib = icebox(&m, &v, vec![api_gadget(&v, 0, &[]), api_gadget(&v, 1, &[])]);
    let x = extract_features(&host_with(&[2]), &v);
    let ranked = rank_gadgets(&ib, &x, &m).unwrap();
    let scores: Vec<f64> = ranked.iter().map(|c| c.score).collect();
    assert_eq!(scores, vec![-2.0, -0.5]);
}

#[test]
fn gadget_with_nothing_new_scores_zero_and_present_targets_are_skipped() {
    let v = vocab(3);
    let mut w = vec![0.0; v.len()];
    w[api_pos(&v, 0)] = -1.0;
    w[api_pos(&v, 1)] = -1.0;
    let m = LinearModel::new(w, 1.0, &v);
    // Gadget for w1 whose only other feature is already present.
    let mut g = api_gadget(&v, 1, &[0]);
    g.r = FeatureVector::from_names(&v, ["api::log.w0"]);
    let ib = icebox(&m, &v, vec![g, api_gadget(&v, 0, &[])]);
    let x = extract_features(&host_with(&[0]), &v);
    let ranked = rank_gadgets(&ib, &x, &m).unwrap();
    assert_eq!(ranked.len(), 1);
    assert_eq!(ranked[0].score, 0.0);
    assert!(ranked[0].delta.is_empty());
}

#[test]
fn stale_icebox_is_rejected() {
    let v = vocab(2);
    let m = LinearModel::new(vec![0.5; v.len()], 0.0, &v);
    let other = LinearModel::new(vec![0.25; v.len()], 0.0, &v);
    let ib = icebox(&other, &v, vec![api_gadget(&v, 0, &[])]);
    let x = extract_features(&host_with(&[]), &v);
    assert!(matches!(rank_gadgets(&ib, &x, &m), Err(AttackError::Transplant(TransplantError::StaleIceBox))));
}

#[test]
fn capability_feasibility() {
    let v = vocab(1);
    let cfg = AttackConfig::default();
    let mut g = api_gadget(&v, 0, &[]);
    let host: BTreeSet<String> = BTreeSet::from(["INTERNET".to_string()]);
    assert!(check_feasibility(&host, &g, &cfg));
    g.manifest_delta.capabilities = BTreeSet::from(["NFC".to_string(), "INTERNET".to_string()]);
    assert!(check_feasibility(&host, &g, &cfg));
    g.manifest_delta.capabilities = BTreeSet::from(["NFC".to_string(), "BLUETOOTH".to_string()]);
    assert!(!check_feasibility(&host, &g, &cfg));
    g.manifest_delta.capabilities = BTreeSet::from(["CAMERA".to_string()]);
    assert!(!check_feasibility(&host, &g, &cfg));
}

#[test]
fn greedy_replay_stops_when_score_crosses() {
    let v = vocab(4);
    let mut w = vec![0.0; v.len()];
    for (i, wi) in [-1.0, -0.75, -0.5, -0.25].into_iter().enumerate() {
        w[api_pos(&v, i)] = wi;
    }
    let m = LinearModel::new(w, 1.5, &v);
    let ib = icebox(&m, &v, (0..4).map(|i| api_gadget(&v, i, &[])).collect());
    let z = host_with(&[]);
    let r = run_attack("s", &z, &m, &v, &ib, &OmegaConstraints::all(v.len()), &AttackConfig::default(), 1).unwrap();
    assert!(r.is_success(), "{r:?}");
    // 1.5 - 1.0 - 0.75 < 0 after two gadgets.
    assert_eq!(r.gadgets_used.len(), 2);
    assert_eq!(r.score_after, -0.25);
    assert_eq!(r.score_simulated, r.score_after);
    assert!(r.gamma.as_ref().unwrap().passed());
}

/// Random weights with a detected host; some instances restrict Ω so that no
/// addable feature helps.
fn random_instance(rng: &mut ChaCha8Rng, dim: usize) -> (LinearModel, FeatureVocabulary, Program, OmegaConstraints, f64) {
    let v = vocab(dim);
    let mut w = vec![0.0; v.len()];
    for i in 0..dim {
        w[api_pos(&v, i)] = rng.gen_range(-1.0..1.0);
    }
    let present: Vec<usize> = (0..dim).filter(|_| rng.gen_bool(0.3)).collect();
    let x = extract_features(&host_with(&present), &v);
    let dot: f64 = x.iter().map(|p| w[p]).sum();
    let bias = -dot + rng.gen_range(0.05..2.0);
    let m = LinearModel::new(w.clone(), bias, &v);
    let omega = match rng.gen_range(0..3) {
        0 => OmegaConstraints::all(v.len()),
        1 => OmegaConstraints::addition_only((0..dim).map(|i| api_pos(&v, i)).filter(|&p| w[p] >= 0.0)),
        _ => OmegaConstraints::addition_only((0..dim).map(|i| api_pos(&v, i)).filter(|_| rng.gen_bool(0.5))),
    };
    let kappa = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..1.5) };
    (m, v, host_with(&present), omega, kappa)
}

#[test]
fn theorem_one_gate_and_zero_side_effect_sufficiency() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut infeasible = 0;
    let mut succeeded = 0;
    for k in 0..120 {
        let dim = rng.gen_range(3..12);
        let (m, v, z, omega, kappa) = random_instance(&mut rng, dim);
        let negative: Vec<Gadget> = (0..dim)
            .filter(|&i| m.weights[api_pos(&v, i)] < 0.0)
            .map(|i| api_gadget(&v, i, &[]))
            .collect();
        let ib = icebox(&m, &v, negative);
        let x = extract_features(&z, &v);
        let feasible = solve_feature_space_attack(&m, &x, &omega, kappa).unwrap().is_feasible();
        let cfg = AttackConfig { confidence: Confidence::High(kappa), ..AttackConfig::default() };
        let r = run_attack("s", &z, &m, &v, &ib, &omega, &cfg, k).unwrap();
        if feasible {
            assert!(r.is_success(), "zero side effects must suffice: {r:?}");
            succeeded += 1;
        } else {
            assert!(matches!(r.outcome, AttackOutcome::Infeasible { reason: InfeasibleReason::FeatureSpace, .. }));
            assert!(r.transformations.is_empty());
            infeasible += 1;
        }
    }
    assert!(infeasible > 10 && succeeded > 10, "{infeasible} {succeeded}");
}

#[test]
fn side_effects_can_defeat_the_attack_and_are_reported() {
    let v = vocab(2);
    let mut w = vec![0.0; v.len()];
    w[api_pos(&v, 0)] = -1.0;
    w[api_pos(&v, 1)] = 5.0;
    let m = LinearModel::new(w, 0.5, &v);
    // The only gadget for w0 drags in w1 but its estimate omits it.
    let mut g = api_gadget(&v, 0, &[1]);
    g.r = FeatureVector::from_names(&v, ["api::log.w0"]);
    let ib = icebox(&m, &v, vec![g]);
    let r = run_attack("s", &host_with(&[]), &m, &v, &ib, &OmegaConstraints::all(v.len()), &AttackConfig::default(), 0).unwrap();
    assert!(matches!(r.outcome, AttackOutcome::Infeasible { reason: InfeasibleReason::IceBox, .. }), "{r:?}");
    assert_eq!(r.score_after, 4.5);
    assert!(r.score_after > r.score_simulated);
}

#[test]
fn result_serializes_as_one_json_line() {
    let v = vocab(1);
    let mut w = vec![0.0; v.len()];
    w[api_pos(&v, 0)] = -1.0;
    let m = LinearModel::new(w, 0.5, &v);
    let ib = icebox(&m, &v, vec![api_gadget(&v, 0, &[])]);
    let r = run_attack("s", &host_with(&[]), &m, &v, &ib, &OmegaConstraints::all(v.len()), &AttackConfig::default(), 0).unwrap();
    let line = r.to_json_line();
    assert!(!line.contains('\n'));
    let back: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(back["outcome"], "success");
    assert_eq!(back["features_added"], 1);
}
