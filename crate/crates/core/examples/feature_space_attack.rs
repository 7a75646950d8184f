//! Train a linear detector and evade it in feature space: the greedy
//! minimum-cardinality attack under addition-only constraints.

use std::collections::BTreeSet;

use evasion::features::{
    auroc, feasibility_bound, quantile, solve_feature_space_attack, train_svm, FeatureSpaceSolution, FeatureVocabulary,
};
use evasion::harness::{attack_omega, generate_corpus, samples_for, split, CorpusConfig};
use evasion::minilang::feature_names;

fn main() {
    let cfg = CorpusConfig { n_goodware: 400, n_malware: 60, seed: 3, ..CorpusConfig::default() };
    let corpus = generate_corpus(&cfg).expect("valid config");
    let (train, test) = split(&corpus, 0.66, 3).expect("both classes present");

    let names: BTreeSet<String> = train.iter().flat_map(|&i| feature_names(&corpus.entries[i].program)).collect();
    let vocab = FeatureVocabulary::new(names).expect("non-empty vocabulary");
    let train_set = samples_for(&corpus, &train, &vocab);
    let test_set = samples_for(&corpus, &test, &vocab);

    let svm = train_svm(&train_set, &vocab, 1.0, 11).expect("trains");
    println!("{} features, test AUROC {:.4}", vocab.len(), auroc(&svm, &test_set).unwrap());

    let benign: Vec<f64> = train_set.iter().filter(|s| !s.malware).map(|s| svm.discriminant(&s.x).unwrap()).collect();
    let kappa = quantile(&benign, 0.25).abs();
    println!("high-confidence margin: {kappa:.3}\n");

    let omega = attack_omega(&vocab);
    let detected = test_set.iter().filter(|s| s.malware && svm.discriminant(&s.x).unwrap() > 0.0);
    for sample in detected.take(4) {
        let h = svm.discriminant(&sample.x).unwrap();
        let bound = feasibility_bound(&svm, &sample.x, &omega).unwrap();
        println!("score {h:+.3}, lowest reachable {bound:+.3}");
        for (label, k) in [("low", 0.0), ("high", kappa)] {
            match solve_feature_space_attack(&svm, &sample.x, &omega, k).unwrap() {
                FeatureSpaceSolution::Feasible { delta, score } => {
                    let added: Vec<&str> = delta.iter().map(|p| vocab.name(p)).collect();
                    println!("  {label:>4}: {} additions reach {score:+.3}", added.len());
                    println!("        includes: {:?}", &added[..added.len().min(4)]);
                }
                FeatureSpaceSolution::Infeasible { bound } => println!("  {label:>4}: infeasible (bound {bound:+.3})"),
            }
        }
    }
}
