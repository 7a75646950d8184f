//! Experiment report: persisted form, human summary and CSV tables.
//!
//! CSV schemas (header row first, stable across runs):
//!
//! | file | columns |
//! |------|---------|
//! | `roc.csv` | `model,fpr,tpr,threshold` (`inf` for the first point) |
//! | `features_added.csv` | `setting,sample,outcome,features_added,score_before,score_simulated,score_after,kappa` |
//! | `stats_cdf.csv` | `population,family,value,cdf` |
//! | `stats_bands.csv` | `family,q1,q3,lower_3sigma,upper_3sigma` |
//! | `runtimes.csv` | `setting,sample,rounds,gadgets,guards,guard_clauses,statements` |
//!
//! `runtimes.csv` holds deterministic work counters; wall-clock times go to
//! `results.jsonl` and `summary.md` only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::AttackOutcome;
use crate::features::{quantile, quantile_sorted};
use crate::minilang::{parse, render, stats, SoftwareStats};

use super::experiment::{ModelChoice, SettingResults};
use super::{HarnessError, Stage};

pub const REPORT_FILES: [&str; 7] = [
    "summary.md",
    "roc.csv",
    "features_added.csv",
    "stats_cdf.csv",
    "stats_bands.csv",
    "runtimes.csv",
    "results.jsonl",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelChoice,
    pub auroc: f64,
    /// `(fpr, tpr, threshold)`; the first threshold is `+inf`.
    #[serde(with = "roc_points")]
    pub roc: Vec<(f64, f64, f64)>,
    pub clip_k: Option<f64>,
    pub max_abs_weight: f64,
    pub weight_entropy: f64,
    pub kappa: f64,
    pub icebox_gadgets: usize,
    pub features_without_donors: usize,
}

mod roc_points {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    type Point = (f64, f64, Option<f64>);

    pub fn serialize<S: Serializer>(v: &[(f64, f64, f64)], s: S) -> Result<S::Ok, S::Error> {
        let pts: Vec<Point> = v.iter().map(|&(f, t, th)| (f, t, th.is_finite().then_some(th))).collect();
        pts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64, f64)>, D::Error> {
        let pts: Vec<Point> = Vec::deserialize(d)?;
        Ok(pts.into_iter().map(|(f, t, th)| (f, t, th.unwrap_or(f64::INFINITY))).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub corpus_size: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub vocabulary_size: usize,
    pub models: Vec<ModelSummary>,
    /// Statistics of the test goodware, the reference population.
    pub benign_stats: Vec<SoftwareStats>,
    pub malware_stats: Vec<SoftwareStats>,
    pub settings: Vec<SettingResults>,
}

/// Interquartile range and 3σ band of one statistic over goodware.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatBand {
    pub family: String,
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
}

impl StatBand {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

impl ExperimentReport {
    pub fn setting(&self, label: &str) -> Option<&SettingResults> {
        self.settings.iter().find(|s| s.setting.label() == label)
    }

    pub fn bands(&self) -> Vec<StatBand> {
        SoftwareStats::FAMILIES
            .iter()
            .enumerate()
            .map(|(k, family)| {
                let values: Vec<f64> = self.benign_stats.iter().map(|s| s.values()[k]).collect();
                let n = values.len().max(1) as f64;
                let mean = values.iter().sum::<f64>() / n;
                let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                StatBand {
                    family: family.to_string(),
                    q1: quantile(&values, 0.25),
                    q3: quantile(&values, 0.75),
                    lower: mean - 3.0 * sd,
                    upper: mean + 3.0 * sd,
                }
            })
            .collect()
    }

    /// `report.json` plus every success's adversarial program and guards
    /// under `adversarial/<setting>/`.
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self).expect("serializable"))?;
        for s in &self.settings {
            let sub = dir.join("adversarial").join(s.setting.slug());
            fs::create_dir_all(&sub)?;
            for r in s.successes() {
                let p = r.adversarial.as_ref().ok_or_else(|| {
                    HarnessError::stage(Stage::Report, format!("{}: success without a program", r.sample))
                })?;
                fs::write(sub.join(format!("{}.mini", r.sample)), render(p))?;
                let mut cnf = String::new();
                for (k, d) in r.predicates.iter().enumerate() {
                    writeln!(cnf, "c guard {k}").expect("string write");
                    cnf.push_str(d);
                }
                fs::write(sub.join(format!("{}.cnf", r.sample)), cnf)?;
            }
        }
        Ok(())
    }
}

/// Read a report written by [`ExperimentReport::save`], reattaching the
/// adversarial programs and guards of successes.
pub fn load_report(dir: &Path) -> Result<ExperimentReport, HarnessError> {
    let err = |e: &dyn std::fmt::Display| HarnessError::stage(Stage::Report, e);
    let mut report: ExperimentReport =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?).map_err(|e| err(&e))?;
    for s in &mut report.settings {
        let sub = dir.join("adversarial").join(s.setting.slug());
        for r in s.results.iter_mut().filter(|r| r.is_success()) {
            let text = fs::read_to_string(sub.join(format!("{}.mini", r.sample)))?;
            r.adversarial = Some(parse(&text).map_err(|e| err(&e))?);
            let cnf = fs::read_to_string(sub.join(format!("{}.cnf", r.sample)))?;
            r.predicates = cnf
                .split("c guard ")
                .filter(|c| !c.is_empty())
                .map(|c| c.split_once('\n').map(|(_, body)| body.to_string()).unwrap_or_default())
                .collect();
        }
    }
    Ok(report)
}

fn outcome_label(o: &AttackOutcome) -> String {
    match o {
        AttackOutcome::Success => "success".into(),
        AttackOutcome::Infeasible { reason, .. } => format!("infeasible-{}", serde_json::to_value(reason).expect("enum").as_str().unwrap_or("?")),
        AttackOutcome::ImplantError { .. } => "implant-error".into(),
        AttackOutcome::ConstraintViolation { constraint } => format!("violation-{constraint}"),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

fn clause_count(dimacs: &str) -> usize {
    dimacs
        .lines()
        .find_map(|l| l.strip_prefix("p cnf "))
        .and_then(|rest| rest.split_whitespace().nth(1))
        .and_then(|m| m.parse().ok())
        .unwrap_or(0)
}

/// Write the summary, the CSV tables, `results.jsonl` and the persisted
/// report (with adversarial programs) into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<(), HarnessError> {
    report.save(dir)?;
    let bands = report.bands();

    let mut roc = String::from("model,fpr,tpr,threshold\n");
    for m in &report.models {
        for &(f, t, th) in &m.roc {
            let th = if th.is_finite() { th.to_string() } else { "inf".into() };
            writeln!(roc, "{},{f},{t},{th}", m.model.label()).expect("string write");
        }
    }

    let mut added = String::from("setting,sample,outcome,features_added,score_before,score_simulated,score_after,kappa\n");
    let mut runtimes = String::from("setting,sample,rounds,gadgets,guards,guard_clauses,statements\n");
    let mut jsonl = String::new();
    for s in &report.settings {
        let label = s.setting.label();
        for r in &s.results {
            writeln!(
                added,
                "{label},{},{},{},{},{},{},{}",
                r.sample,
                outcome_label(&r.outcome),
                r.features_added,
                r.score_before,
                r.score_simulated,
                r.score_after,
                r.kappa
            )
            .expect("string write");
            writeln!(
                runtimes,
                "{label},{},{},{},{},{},{}",
                r.sample,
                r.rounds,
                r.gadgets_used.len(),
                r.predicates.len(),
                r.predicates.iter().map(|d| clause_count(d)).sum::<usize>(),
                r.adversarial.as_ref().map_or(0, |p| p.statement_count())
            )
            .expect("string write");
            let mut v = serde_json::to_value(r).expect("serializable");
            v["setting"] = serde_json::Value::String(label.clone());
            jsonl.push_str(&v.to_string());
            jsonl.push('\n');
        }
    }

    let mut cdf = String::from("population,family,value,cdf\n");
    let mut populations: Vec<(String, Vec<SoftwareStats>)> = vec![
        ("goodware".into(), report.benign_stats.clone()),
        ("malware".into(), report.malware_stats.clone()),
    ];
    for s in &report.settings {
        let adv = s.successes().filter_map(|r| r.adversarial.as_ref()).map(stats).collect();
        populations.push((s.setting.label(), adv));
    }
    for (name, pop) in &populations {
        for (k, family) in SoftwareStats::FAMILIES.iter().enumerate() {
            let mut values: Vec<f64> = pop.iter().map(|s| s.values()[k]).collect();
            values.sort_by(f64::total_cmp);
            let n = values.len();
            for (i, v) in values.iter().enumerate() {
                if i + 1 < n && values[i + 1] == *v {
                    continue;
                }
                writeln!(cdf, "{name},{family},{v},{}", (i + 1) as f64 / n as f64).expect("string write");
            }
        }
    }

    let mut band_csv = String::from("family,q1,q3,lower_3sigma,upper_3sigma\n");
    for b in &bands {
        writeln!(band_csv, "{},{},{},{},{}", b.family, b.q1, b.q3, b.lower, b.upper).expect("string write");
    }

    fs::write(dir.join("roc.csv"), roc)?;
    fs::write(dir.join("features_added.csv"), added)?;
    fs::write(dir.join("stats_cdf.csv"), cdf)?;
    fs::write(dir.join("stats_bands.csv"), band_csv)?;
    fs::write(dir.join("runtimes.csv"), runtimes)?;
    fs::write(dir.join("results.jsonl"), jsonl)?;
    fs::write(dir.join("summary.md"), summary(report, &bands, &populations))?;
    Ok(())
}

fn summary(report: &ExperimentReport, bands: &[StatBand], populations: &[(String, Vec<SoftwareStats>)]) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "# Experiment summary\n").unwrap();
    writeln!(
        w,
        "Seed {}; {} programs ({} train / {} test); {} features.\n",
        report.seed, report.corpus_size, report.train_size, report.test_size, report.vocabulary_size
    )
    .unwrap();

    writeln!(w, "## Detectors\n").unwrap();
    writeln!(w, "| model | AUROC | k | max abs weight | weight entropy | kappa (H) | gadgets | features without donors |").unwrap();
    writeln!(w, "|---|---|---|---|---|---|---|---|").unwrap();
    for m in &report.models {
        let k = m.clip_k.map_or("-".to_string(), |k| format!("{k:.4}"));
        writeln!(
            w,
            "| {} | {:.4} | {k} | {:.4} | {:.3} | {:.4} | {} | {} |",
            m.model.label(),
            m.auroc,
            m.max_abs_weight,
            m.weight_entropy,
            m.kappa,
            m.icebox_gadgets,
            m.features_without_donors
        )
        .unwrap();
    }

    writeln!(w, "\n## Attacks\n").unwrap();
    writeln!(w, "| setting | true positives | evasive | implant errors | implant-error rate | other failures | success rate | median features added | median wall time (ms) |").unwrap();
    writeln!(w, "|---|---|---|---|---|---|---|---|---|").unwrap();
    for s in &report.settings {
        let n = s.results.len();
        let ok = s.successes().count();
        let ie = s.implant_errors();
        let rate = |a: usize, b: usize| if b == 0 { "-".to_string() } else { format!("{:.1}%", 100.0 * a as f64 / b as f64) };
        let feats = median(s.successes().map(|r| r.features_added as f64).collect());
        let wall = median(s.results.iter().map(|r| r.wall_time_ms).collect());
        writeln!(
            w,
            "| {} | {} | {ok} | {ie} | {} | {} | {} | {feats} | {wall:.1} |",
            s.setting.label(),
            s.true_positives,
            rate(ie, n),
            n - ok - ie,
            rate(ok, n - ie),
        )
        .unwrap();
    }

    writeln!(w, "\n## Software statistics\n").unwrap();
    writeln!(w, "Goodware reference bands (interquartile range and mean ± 3σ), and the share of each population inside the 3σ band.\n").unwrap();
    let mut header = String::from("| family | q1 | q3 | 3σ band |");
    let mut rule = String::from("|---|---|---|---|");
    for (name, _) in populations {
        write!(header, " {name} |").unwrap();
        rule.push_str("---|");
    }
    writeln!(w, "{header}\n{rule}").unwrap();
    for (k, b) in bands.iter().enumerate() {
        let mut row = format!("| {} | {:.2} | {:.2} | [{:.2}, {:.2}] |", b.family, b.q1, b.q3, b.lower, b.upper);
        for (_, pop) in populations {
            if pop.is_empty() {
                row.push_str(" - |");
            } else {
                let inside = pop.iter().filter(|s| b.contains(s.values()[k])).count();
                write!(row, " {:.0}% |", 100.0 * inside as f64 / pop.len() as f64).unwrap();
            }
        }
        writeln!(w, "{row}").unwrap();
    }
    out
}
