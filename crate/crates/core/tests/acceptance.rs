//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evasion::attack::{run_attack, AttackConfig, AttackOutcome, Confidence};
use evasion::features::{
    auroc, feasibility_bound, solve_feature_space_attack, train_svm, FeatureSpaceSolution, FeatureVector,
    FeatureVocabulary, LinearModel, OmegaConstraints,
};
use evasion::harness::{
    attack_omega, generate_corpus, load_trained, run_experiment, samples_for, CorpusConfig, ExperimentConfig,
    ExperimentReport, Setting, SETTINGS,
};
use evasion::minilang::{
    eliminate_dead_code, extract_features, feature_names, interpret, interpret_case, parse, Expr, Program, Stmt,
    DEFAULT_FUEL,
};
use evasion::opaque::{
    generate_opaque_predicate, is_satisfiable, measure_unsat_fraction, random_3sat_raw, Cnf3, OpaqueParams, SatOutcome,
};
use evasion::transplant::{build_icebox, HarvestParams};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Desk {
    cfg: ExperimentConfig,
    report: ExperimentReport,
}

fn desk() -> Desk {
    let cfg = ExperimentConfig::default();
    let report = run_experiment(&cfg).expect("desk experiment runs");
    Desk { cfg, report }
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2] as f64,
        n => (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0,
    }
}

fn evasion_completeness(d: &Desk) -> Outcome {
    let mut parts = Vec::new();
    for s in &d.report.settings {
        let label = s.setting.label();
        ensure(s.true_positives > 0, || format!("{label}: no true positives to attack"))?;
        ensure(s.results.len() == s.true_positives, || format!("{label}: not every true positive was attacked"))?;
        let eligible: Vec<_> = s
            .results
            .iter()
            .filter(|r| !matches!(r.outcome, AttackOutcome::ImplantError { .. }))
            .collect();
        for r in &eligible {
            ensure(r.is_success(), || format!("{label} {}: {:?}", r.sample, r.outcome))?;
            let g = r.gamma.as_ref().ok_or_else(|| format!("{label} {}: constraints not checked", r.sample))?;
            ensure(g.transformations && g.semantics && g.plausibility && g.robustness, || {
                format!("{label} {}: {g:?}", r.sample)
            })?;
            ensure(r.score_after < -r.kappa, || format!("{label} {}: realized score {}", r.sample, r.score_after))?;
        }
        parts.push(format!("{label} {}/{}", eligible.len(), s.true_positives));
    }
    Ok(parts.join(", "))
}

fn cost_shift(d: &Desk) -> Outcome {
    let med = |label: &str| {
        let s = d.report.setting(label).expect("setting present");
        median(s.successes().map(|r| r.features_added).collect())
    };
    let mut parts = Vec::new();
    for conf in ["L", "H"] {
        let (svm, sec) = (med(&format!("SVM({conf})")), med(&format!("SecSVM({conf})")));
        ensure(sec > svm, || format!("({conf}) SecSVM median {sec} is not above SVM median {svm}"))?;
        parts.push(format!("({conf}) {sec} > {svm}"));
    }
    Ok(parts.join(", "))
}

fn secsvm_contract(d: &Desk) -> Outcome {
    let corpus = generate_corpus(&d.cfg.corpus).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let trained = evasion::harness::train_models(&corpus, &d.cfg).map_err(|e| e.to_string())?;
    trained.save(dir.path()).map_err(|e| e.to_string())?;
    let trained = load_trained(dir.path()).map_err(|e| e.to_string())?;
    let k = trained.grid.k;
    ensure(trained.secsvm.clip_k == Some(k), || "stored bound differs from the grid-search result".into())?;
    let worst = trained.secsvm.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    ensure(worst <= k, || format!("max |w| {worst} exceeds k {k}"))?;
    let test = samples_for(&corpus, &trained.test, &trained.vocab);
    let (a_svm, a_sec) = (auroc(&trained.svm, &test).unwrap(), auroc(&trained.secsvm, &test).unwrap());
    ensure(a_svm - a_sec <= 0.02, || format!("AUROC loss {:.4} exceeds 0.02", a_svm - a_sec))?;
    let reported = d.report.models.iter().find(|m| m.clip_k.is_some()).expect("sec-svm summary");
    ensure((reported.auroc - a_sec).abs() < 1e-12, || "report AUROC disagrees with recomputation".into())?;
    Ok(format!("k = {k:.4}, max |w| = {worst:.4}, AUROC {a_svm:.4} -> {a_sec:.4}"))
}

fn opaque_soundness() -> Outcome {
    let params = OpaqueParams::default();
    let mut preds = Vec::with_capacity(1000);
    for seed in 0..1000u64 {
        let p = generate_opaque_predicate(&params, seed);
        let (n, m) = (p.cnf.n as f64, p.cnf.m() as f64);
        ensure((n - 40.0).abs() <= 40.0 * params.jitter + 1.0 && (m - 184.0).abs() <= 184.0 * params.jitter + 1.0, || {
            format!("seed {seed}: n = {n}, m = {m} outside the jitter band")
        })?;
        ensure(is_satisfiable(&p.cnf, u64::MAX) == SatOutcome::Unsat, || format!("seed {seed}: satisfiable guard"))?;
        preds.push(p);
    }
    const SENTINEL: i64 = -424_242;
    let seeds = 100_000u64;
    for p in preds.iter().take(100) {
        let mut host: Program =
            parse("manifest {}\nentry M.main\nclass M {\n fn main(x) {\n emit x;\n }\n}\n").expect("host parses");
        host.classes[0].functions[0].body.splice(0..0, p.guard(vec![Stmt::Emit(Expr::Int(SENTINEL))]));
        for s in 0..seeds {
            let t = interpret(&host, 1, s, DEFAULT_FUEL).map_err(|e| e.to_string())?;
            ensure(t.outputs.len() == 1, || format!("guard taken under runtime seed {s}"))?;
        }
    }
    Ok(format!("1000 guards unsat, 100 x {seeds} runs never entered"))
}

fn brute_force_sat(c: &Cnf3) -> bool {
    (0u64..1 << c.n).any(|bits| {
        let a: Vec<bool> = (0..c.n).map(|i| bits >> i & 1 == 1).collect();
        c.eval(&a)
    })
}

fn phase_transition() -> Outcome {
    let (n, trials, seed) = (16, 300, 77);
    let ratios = [1.0, 3.0, 4.6, 6.0];
    let fr: Vec<f64> = ratios.iter().map(|&r| measure_unsat_fraction(n, r, trials, seed)).collect();
    ensure(fr.windows(2).all(|w| w[0] <= w[1]), || format!("not monotone: {fr:?}"))?;
    ensure(fr[0] <= 0.01, || format!("ratio 1.0 gives {}", fr[0]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = (4.6 * n as f64).round() as usize;
    let oracle = (0..trials).filter(|_| !brute_force_sat(&random_3sat_raw(n, m, &mut rng))).count() as f64 / trials as f64;
    ensure(oracle == fr[2], || format!("independent count {oracle} differs from {}", fr[2]))?;
    Ok(format!("unsat fractions {fr:?} at m/n {ratios:?}"))
}

fn robustness(d: &Desk) -> Outcome {
    let mut checked = 0;
    for s in &d.report.settings {
        for r in s.successes() {
            let z = r.adversarial.as_ref().ok_or("success without program")?;
            ensure(feature_names(&eliminate_dead_code(z)) == feature_names(z), || {
                format!("{} {}: features change under dead code elimination", s.setting.label(), r.sample)
            })?;
            checked += 1;
        }
    }
    ensure(checked > 0, || "no successes to check".into())?;

    let control = parse(
        "manifest {\n  capability INTERNET\n  capability VIBRATE\n  component activity MainActivity\n}\nentry MainActivity.main\n\nclass MainActivity {\n  fn main(input) {\n    if false {\n      api net.get(input);\n    }\n    api vibrate.buzz(input);\n    return input;\n  }\n}\n",
    )
    .map_err(|e| e.to_string())?;
    let before = feature_names(&control);
    let after = feature_names(&eliminate_dead_code(&control));
    let stripped: BTreeSet<_> = before.difference(&after).cloned().collect();
    let expected: BTreeSet<String> = ["api::net.get", "capability::INTERNET"].iter().map(|s| s.to_string()).collect();
    ensure(stripped == expected, || format!("control: stripped {stripped:?}"))?;
    Ok(format!("{checked} adversarial programs stable; control strips {} features", stripped.len()))
}

fn semantics(d: &Desk) -> Outcome {
    let corpus = generate_corpus(&d.cfg.corpus).map_err(|e| e.to_string())?;
    let mut runs = 0;
    for s in &d.report.settings {
        for r in s.successes() {
            let entry = corpus.get(&r.sample).ok_or("unknown sample")?;
            let z = r.adversarial.as_ref().ok_or("success without program")?;
            for &t in &entry.upsilon {
                let a = interpret_case(&entry.program, t, d.cfg.attack.fuel).map_err(|e| e.to_string())?;
                let b = interpret_case(z, t, d.cfg.attack.fuel).map_err(|e| e.to_string())?;
                ensure(a == b, || format!("{} {}: traces differ on {t:?}", s.setting.label(), r.sample))?;
                runs += 1;
            }
        }
    }
    ensure(runs > 0, || "no successes to check".into())?;
    Ok(format!("{runs} trace comparisons identical"))
}

fn theorem_one_gate() -> Outcome {
    let cfg = CorpusConfig { n_goodware: 120, n_malware: 40, seed: 31, ..CorpusConfig::default() };
    let corpus = generate_corpus(&cfg).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    let names: BTreeSet<String> = corpus.entries.iter().flat_map(|e| feature_names(&e.program)).collect();
    let vocab = FeatureVocabulary::new(names).map_err(|e| e.to_string())?;
    let base = train_svm(&samples_for(&corpus, &all, &vocab), &vocab, 1.0, 3).map_err(|e| e.to_string())?;
    let donors: Vec<_> = corpus.entries.iter().filter(|e| !e.malware).map(|e| (e.id.clone(), e.program.clone())).collect();
    let malware: Vec<_> = corpus.entries.iter().filter(|e| e.malware).collect();
    let full = attack_omega(&vocab);
    let scale = base.max_abs_weight();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut infeasible, mut successes, mut instances) = (0, 0, 0u64);
    for model_idx in 0..50u64 {
        let weights: Vec<f64> = base.weights.iter().map(|w| w + rng.gen_range(-0.5..0.5) * scale).collect();
        let probe = LinearModel::new(weights.clone(), 0.0, &vocab);
        let lowest = malware.iter().map(|e| probe.dot(&extract_features(&e.program, &vocab))).fold(f64::INFINITY, f64::min);
        let model = LinearModel::new(weights, rng.gen_range(0.05..1.0) - lowest, &vocab);
        let params = HarvestParams { n_features: 20, n_donors: 2, attempts_per_gadget: 3 };
        let (icebox, _) = build_icebox(&donors, &model, &vocab, &params, model_idx).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            instances += 1;
            let entry = malware.choose(&mut rng).expect("malware present");
            let x = extract_features(&entry.program, &vocab);
            let kind = rng.gen_range(0..4);
            let omega = match kind {
                1 => OmegaConstraints::addition_only(full.addable.iter().copied().filter(|&p| model.weights[p] >= 0.0)),
                3 => OmegaConstraints::addition_only(full.addable.iter().copied().filter(|_| rng.gen_bool(0.3))),
                _ => full.clone(),
            };
            let bound = feasibility_bound(&model, &x, &omega).map_err(|e| e.to_string())?;
            let kappa = match kind {
                2 => (-bound + rng.gen_range(0.0..1.0)).max(0.0),
                3 => rng.gen_range(0.0..2.0),
                _ => 0.0,
            };
            let fs = solve_feature_space_attack(&model, &x, &omega, kappa).map_err(|e| e.to_string())?;
            let ac = AttackConfig {
                confidence: if kappa > 0.0 { Confidence::High(kappa) } else { Confidence::Low },
                upsilon_inputs: entry.upsilon.clone(),
                ..AttackConfig::default()
            };
            let r = run_attack(&entry.id, &entry.program, &model, &vocab, &icebox, &omega, &ac, instances)
                .map_err(|e| e.to_string())?;
            if !fs.is_feasible() {
                infeasible += 1;
                ensure(!r.is_success(), || format!("instance {instances}: success although infeasible"))?;
                ensure(r.features_added == 0 && r.transformations.is_empty(), || {
                    format!("instance {instances}: infeasible sample was modified")
                })?;
            }
            successes += r.is_success() as usize;
        }
    }
    ensure(infeasible >= 100, || format!("only {infeasible} infeasible instances"))?;
    ensure(successes > 0, || "no feasible instance succeeded; the gate check is vacuous".into())?;
    Ok(format!("{instances} instances, {infeasible} infeasible, {successes} successes"))
}

/// Fewest additions reaching `h < -kappa` and the lowest score at that size,
/// by enumerating every subset of the absent addable features.
fn exhaustive(model: &LinearModel, x: &FeatureVector, addable: &[usize], kappa: f64) -> Option<(usize, f64)> {
    let h = model.discriminant(x).unwrap();
    let free: Vec<usize> = addable.iter().copied().filter(|&p| !x.contains(p)).collect();
    let mut best: Option<(usize, f64)> = None;
    for mask in 0u32..1 << free.len() {
        let score = h + (0..free.len()).filter(|b| mask >> b & 1 == 1).map(|b| model.weights[free[b]]).sum::<f64>();
        if score < -kappa {
            let c = mask.count_ones() as usize;
            best = match best {
                Some((bc, bs)) if bc < c || (bc == c && bs <= score) => Some((bc, bs)),
                _ => Some((c, score)),
            };
        }
    }
    best
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut feasible, mut infeasible) = (0, 0);
    for i in 0..200 {
        let dim = rng.gen_range(4..24);
        let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let model = LinearModel::from_weights(weights, rng.gen_range(-1.0..3.0));
        let present: Vec<usize> = (0..dim).filter(|_| rng.gen_bool(0.3)).collect();
        let x = FeatureVector::from_positions(dim, present).unwrap();
        let mut positions: Vec<usize> = (0..dim).collect();
        positions.shuffle(&mut rng);
        positions.truncate(rng.gen_range(0..=15.min(dim)));
        let omega = OmegaConstraints::addition_only(positions.iter().copied());
        let kappa = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..2.0) };
        let greedy = solve_feature_space_attack(&model, &x, &omega, kappa).unwrap();
        match (greedy, exhaustive(&model, &x, &positions, kappa)) {
            (FeatureSpaceSolution::Feasible { delta, score }, Some((c, s))) => {
                ensure(delta.len() == c, || format!("instance {i}: greedy adds {} features, optimum {c}", delta.len()))?;
                ensure((score - s).abs() < 1e-9, || format!("instance {i}: greedy score {score}, optimum {s}"))?;
                feasible += 1;
            }
            (FeatureSpaceSolution::Infeasible { .. }, None) => infeasible += 1,
            (g, o) => return Err(format!("instance {i}: greedy {g:?} vs exhaustive {o:?}")),
        }
    }
    ensure(feasible > 0 && infeasible > 0, || format!("degenerate sample: {feasible} feasible, {infeasible} infeasible"))?;
    Ok(format!("200 instances agree ({feasible} feasible, {infeasible} infeasible)"))
}

fn run_all(out: &Path, config: &Path, workers: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_evasion"))
        .args(["run-all", "--seed", "11", "--workers", &workers.to_string()])
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("run-all exited with {status}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("desk.toml");
    std::fs::write(&config, "[corpus]\nn_goodware = 300\nn_malware = 40\n").map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_all(&a, &config, 1)?;
    run_all(&b, &config, 2)?;
    let mut compared = 0;
    let mut names: Vec<_> = std::fs::read_dir(a.join("report")).map_err(|e| e.to_string())?.flatten().map(|e| e.file_name()).collect();
    names.sort();
    for name in names.iter().filter(|n| n.to_string_lossy().ends_with(".csv")) {
        let x = std::fs::read(a.join("report").join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join("report").join(name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{} differs between runs", name.to_string_lossy()))?;
        ensure(x.iter().filter(|&&c| c == b'\n').count() > 1, || format!("{} has no rows", name.to_string_lossy()))?;
        compared += 1;
    }
    ensure(compared == 5, || format!("expected 5 CSV files, found {compared}"))?;
    Ok(format!("{compared} CSV files byte-identical across two runs (1 and 2 workers)"))
}

fn main() {
    let started = Instant::now();
    let desk = desk();
    let settings: Vec<Setting> = SETTINGS.to_vec();
    assert_eq!(desk.report.settings.iter().map(|s| s.setting).collect::<Vec<_>>(), settings);
    eprintln!("desk experiment finished in {:.1?}", started.elapsed());

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("evasion completeness", Box::new(|| evasion_completeness(&desk))),
        ("hardening cost shift", Box::new(|| cost_shift(&desk))),
        ("sec-svm contract", Box::new(|| secsvm_contract(&desk))),
        ("opaque predicate soundness", Box::new(opaque_soundness)),
        ("phase transition", Box::new(phase_transition)),
        ("preprocessing robustness", Box::new(|| robustness(&desk))),
        ("semantics preservation", Box::new(|| semantics(&desk))),
        ("feasibility gate", Box::new(theorem_one_gate)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why}) [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed in {:.1?}", criteria.len() - failed, criteria.len(), started.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
