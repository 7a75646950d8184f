//! Opaque predicates from unsatisfiable Random 3-SAT formulas near the
//! satisfiability threshold.

mod cnf;
mod dpll;
mod generate;
mod guard;

pub use cnf::{random_3sat_raw, Cnf3, DimacsError, Lit};
pub use dpll::{exhaustive_satisfiable, is_satisfiable, solve_with_stats, SatOutcome, SolverStats, EXHAUSTIVE_MAX_VARS};
pub use generate::{generate_random_3sat, generate_random_3sat_with, measure_unsat_fraction};
pub use guard::{generate_opaque_predicate, OpaqueParams, OpaquePredicate};
