//! Harvest benign gadgets into an ice-box, then transplant them into a
//! detected malware sample until the realized program evades.

use std::collections::BTreeSet;

use evasion::attack::{run_attack, AttackConfig, AttackOutcome};
use evasion::features::{train_svm, FeatureVocabulary};
use evasion::harness::{attack_omega, generate_corpus, samples_for, split, CorpusConfig};
use evasion::minilang::{extract_features, feature_names, render, stats};
use evasion::transplant::{build_icebox, HarvestParams};

fn main() {
    let cfg = CorpusConfig { n_goodware: 400, n_malware: 60, seed: 8, ..CorpusConfig::default() };
    let corpus = generate_corpus(&cfg).expect("valid config");
    let (train, test) = split(&corpus, 0.66, 8).expect("both classes present");
    let names: BTreeSet<String> = train.iter().flat_map(|&i| feature_names(&corpus.entries[i].program)).collect();
    let vocab = FeatureVocabulary::new(names).expect("non-empty vocabulary");
    let svm = train_svm(&samples_for(&corpus, &train, &vocab), &vocab, 1.0, 4).expect("trains");

    let donors: Vec<_> = train
        .iter()
        .map(|&i| &corpus.entries[i])
        .filter(|e| !e.malware)
        .map(|e| (e.id.clone(), e.program.clone()))
        .collect();
    let params = HarvestParams { n_features: 40, ..HarvestParams::default() };
    let (icebox, log) = build_icebox(&donors, &svm, &vocab, &params, 99).expect("harvest");
    println!(
        "ice-box: {} gadgets for {} features ({} discarded as net malicious, {} features without donors)",
        icebox.len(),
        log.features_considered,
        log.discarded_positive,
        log.features_without_donors.len()
    );
    if let Some(g) = icebox.gadgets().next() {
        println!("\nfirst gadget {} from {} targets {} and carries {} features:", g.id, g.donor, g.target_name, g.r.len());
        println!("{}", render(&g.as_program()));
    }

    let omega = attack_omega(&vocab);
    let sample = test
        .iter()
        .map(|&i| &corpus.entries[i])
        .find(|e| e.malware && svm.discriminant(&extract_features(&e.program, &vocab)).unwrap() > 0.0)
        .expect("a detected malware sample");
    let ac = AttackConfig { upsilon_inputs: sample.upsilon.clone(), ..AttackConfig::default() };
    let result = run_attack(&sample.id, &sample.program, &svm, &vocab, &icebox, &omega, &ac, 7).expect("attack runs");

    println!("attacking {}: score {:+.3} -> {:+.3}", sample.id, result.score_before, result.score_after);
    println!("outcome {:?}, {} features added by {} gadgets", result.outcome, result.features_added, result.gadgets_used.len());
    for t in &result.transformations {
        println!("  {} implanted at {}[{}]", t.gadget, t.function, t.index);
    }
    if let (AttackOutcome::Success, Some(adv)) = (&result.outcome, &result.adversarial) {
        println!("constraints: {:?}", result.gamma.as_ref().expect("checked on success"));
        println!("size {} -> {} statements", stats(&sample.program).size, stats(adv).size);
    }
}
