//! Filtered Random 3-SAT generation and phase-transition measurement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cnf::{random_3sat_raw, Cnf3};
use super::dpll::{exhaustive_satisfiable, is_satisfiable, SatOutcome, EXHAUSTIVE_MAX_VARS};

/// Random 3-SAT with Horn and 2-SAT-reducible draws rejected and redrawn.
pub fn generate_random_3sat(n: usize, m: usize, seed: u64) -> Cnf3 {
    generate_random_3sat_with(n, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn generate_random_3sat_with<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Cnf3 {
    loop {
        let c = random_3sat_raw(n, m, rng);
        // A formula with no clauses is Horn, so m = 0 would never terminate.
        if m == 0 || (!c.is_horn() && !c.is_2sat_reducible()) {
            return c;
        }
    }
}

/// Fraction of raw Random 3-SAT formulas with `m = round(ratio * n)` that are
/// unsatisfiable. Exact per formula: exhaustive up to
/// [`EXHAUSTIVE_MAX_VARS`] variables, unbounded DPLL beyond.
pub fn measure_unsat_fraction(n: usize, ratio: f64, trials: usize, seed: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let m = (ratio * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unsat = (0..trials)
        .filter(|_| {
            let c = random_3sat_raw(n, m, &mut rng);
            if n <= EXHAUSTIVE_MAX_VARS {
                !exhaustive_satisfiable(&c)
            } else {
                is_satisfiable(&c, u64::MAX) == SatOutcome::Unsat
            }
        })
        .count();
    unsat as f64 / trials as f64
}
