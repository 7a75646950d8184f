//! Sec-SVM: bound every weight to [-k, k], choose k by a sweep that keeps
//! AUROC close to the plain SVM, and compare how many features an attacker
//! must add against each model.

use std::collections::BTreeSet;

use evasion::features::{
    auroc, grid_search_k_with_floor, solve_feature_space_attack, train_secsvm, train_svm_with, weight_entropy,
    FeatureSpaceSolution, FeatureVocabulary, LinearModel, Sample, SgdConfig,
};
use evasion::harness::{attack_omega, generate_corpus, samples_for, split, CorpusConfig, TrainingConfig};
use evasion::minilang::feature_names;

fn additions_needed(model: &LinearModel, vocab: &FeatureVocabulary, test: &[Sample]) -> Vec<usize> {
    let omega = attack_omega(vocab);
    test.iter()
        .filter(|s| s.malware && model.discriminant(&s.x).unwrap() > 0.0)
        .filter_map(|s| match solve_feature_space_attack(model, &s.x, &omega, 0.0).unwrap() {
            FeatureSpaceSolution::Feasible { delta, .. } => Some(delta.len()),
            FeatureSpaceSolution::Infeasible { .. } => None,
        })
        .collect()
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2] as f64,
        n => (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0,
    }
}

fn main() {
    let cfg = CorpusConfig { n_goodware: 600, n_malware: 80, seed: 5, ..CorpusConfig::default() };
    let corpus = generate_corpus(&cfg).expect("valid config");
    let (train, test) = split(&corpus, 0.66, 5).expect("both classes present");
    let names: BTreeSet<String> = train.iter().flat_map(|&i| feature_names(&corpus.entries[i].program)).collect();
    let vocab = FeatureVocabulary::new(names).expect("non-empty vocabulary");
    let train_set = samples_for(&corpus, &train, &vocab);
    let test_set = samples_for(&corpus, &test, &vocab);

    let tc = TrainingConfig::default();
    let sgd: SgdConfig = tc.sgd(21);
    let svm = train_svm_with(&train_set, &vocab, &sgd).unwrap();
    let grid = grid_search_k_with_floor(&train_set, &test_set, &vocab, &sgd, tc.auroc_loss_budget, Some(tc.detection_budget))
        .unwrap();
    println!("sweep from max |w| = {:.4} (reference AUROC {:.4})", svm.max_abs_weight(), grid.reference_auroc);
    for (k, a) in &grid.sweep {
        println!("  k = {k:.4}  AUROC {a:.4}");
    }
    let sec = train_secsvm(&train_set, &vocab, &sgd, grid.k).unwrap();

    println!("\n{:<8} {:>8} {:>10} {:>9} {:>16}", "model", "AUROC", "max |w|", "entropy", "median additions");
    for (label, m) in [("SVM", &svm), ("SecSVM", &sec)] {
        println!(
            "{label:<8} {:>8.4} {:>10.4} {:>9.3} {:>16}",
            auroc(m, &test_set).unwrap(),
            m.max_abs_weight(),
            weight_entropy(&m.weights),
            median(additions_needed(m, &vocab, &test_set))
        );
    }
}
