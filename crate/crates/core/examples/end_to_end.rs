//! Full desk experiment: corpus, both detectors, ice-boxes, four attack
//! settings and the report files.
//!
//! `cargo run --release --example end_to_end -- [out_dir]`

use std::path::PathBuf;

use evasion::harness::{emit_report, run_experiment, ExperimentConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/end_to_end"));
    let cfg = ExperimentConfig { out_dir: out.clone(), ..ExperimentConfig::default() };
    let report = run_experiment(&cfg).expect("experiment runs");
    emit_report(&report, &out).expect("report written");
    print!("{}", std::fs::read_to_string(out.join("summary.md")).unwrap());
}
