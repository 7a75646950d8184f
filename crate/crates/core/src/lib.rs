//! Problem-space evasion attacks against linear malware detectors.
//!
//! The crate models the full attack pipeline on a self-contained program
//! language: feature-space attacks on linear models ([`features`]), the
//! program space with its analyses and preprocessing ([`minilang`]),
//! always-false guards built from unsatisfiable random 3-SAT formulas
//! ([`opaque`]), gadget harvesting and implantation ([`transplant`]), the
//! greedy gadget-selection attack with constraint verification ([`attack`]),
//! and corpus generation plus experiment orchestration ([`harness`]).

pub mod features;
pub mod minilang;
pub mod opaque;
pub mod transplant;
pub mod attack;
pub mod harness;
