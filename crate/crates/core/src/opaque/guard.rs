//! Always-false guards: an unsatisfiable formula evaluated over a runtime
//! random boolean array, emitted as program statements.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cnf::{Cnf3, Lit};
use super::dpll::{is_satisfiable, SatOutcome};
use super::generate::generate_random_3sat_with;
use crate::minilang::{is_reserved, BinOp, Expr, RandomExpr, Stmt};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpaqueParams {
    pub n: usize,
    pub m: usize,
    /// Relative jitter applied independently to `n` and `m` per emission.
    pub jitter: f64,
    /// DPLL decision budget; formulas not proven unsat within it are redrawn.
    pub solver_budget: u64,
}

impl Default for OpaqueParams {
    fn default() -> Self {
        Self { n: 40, m: 184, jitter: 0.1, solver_budget: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpaquePredicate {
    pub cnf: Cnf3,
    /// Variable holding the random boolean array.
    pub array_var: String,
    /// Variable holding the running conjunction.
    pub flag_var: String,
    /// Formulas drawn before an unsat one was found.
    pub attempts: usize,
}

const WORDS: [&str; 16] = [
    "cache", "state", "mask", "ready", "token", "valid", "probe", "latch", "seen", "bits", "sync",
    "hint", "slot", "mark", "gate", "pulse",
];

fn fresh_name<R: Rng + ?Sized>(rng: &mut R) -> String {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let word = WORDS.choose(rng).expect("non-empty word list");
    let suffix: String = (0..4).map(|_| *ALNUM.choose(rng).expect("non-empty") as char).collect();
    format!("{word}_{suffix}")
}

/// Draw formulas with jittered size until one is non-Horn, not 2-SAT
/// reducible and proven unsatisfiable, then name the guard variables.
pub fn generate_opaque_predicate(params: &OpaqueParams, seed: u64) -> OpaquePredicate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    let cnf = loop {
        attempts += 1;
        let n = jitter(params.n, params.jitter, &mut rng).max(3);
        let m = jitter(params.m, params.jitter, &mut rng).max(1);
        let c = generate_random_3sat_with(n, m, &mut rng);
        if is_satisfiable(&c, params.solver_budget) == SatOutcome::Unsat {
            break c;
        }
    };
    let array_var = fresh_name(&mut rng);
    let mut flag_var = fresh_name(&mut rng);
    while flag_var == array_var {
        flag_var = fresh_name(&mut rng);
    }
    OpaquePredicate { cnf, array_var, flag_var, attempts }
}

fn jitter<R: Rng + ?Sized>(v: usize, rel: f64, rng: &mut R) -> usize {
    if rel <= 0.0 {
        return v;
    }
    let f = rng.gen_range(1.0 - rel..=1.0 + rel);
    (v as f64 * f).round() as usize
}

fn lit_expr(array: &str, l: Lit) -> Expr {
    let e = Expr::index(Expr::var(array), Expr::Int(l.var as i64));
    if l.negated {
        Expr::not(e)
    } else {
        e
    }
}

impl OpaquePredicate {
    /// Rename the guard variables so neither collides with `taken`.
    pub fn avoid_names(&mut self, taken: &BTreeSet<String>) {
        let mut k = 0;
        let base = (self.array_var.clone(), self.flag_var.clone());
        while taken.contains(&self.array_var) || taken.contains(&self.flag_var) || is_reserved(&self.array_var) {
            k += 1;
            self.array_var = format!("{}{k}", base.0);
            self.flag_var = format!("{}{k}", base.1);
        }
    }

    /// Statements computing the flag: the random array, then the whole
    /// formula as one conjunction. The flag is false on every path.
    pub fn prelude(&self) -> Vec<Stmt> {
        let a = self.array_var.as_str();
        let formula = self
            .cnf
            .clauses
            .iter()
            .map(|clause| {
                Expr::binary(
                    BinOp::Or,
                    Expr::binary(BinOp::Or, lit_expr(a, clause[0]), lit_expr(a, clause[1])),
                    lit_expr(a, clause[2]),
                )
            })
            .reduce(|acc, c| Expr::binary(BinOp::And, acc, c))
            .unwrap_or(Expr::Bool(true));
        vec![
            Stmt::Assign(a.to_string(), Expr::Random(RandomExpr::Bools(Box::new(Expr::Int(self.cnf.n as i64))))),
            Stmt::Assign(self.flag_var.clone(), formula),
        ]
    }

    /// `prelude` followed by `if flag { body }`.
    pub fn guard(&self, body: Vec<Stmt>) -> Vec<Stmt> {
        let mut out = self.prelude();
        out.push(Stmt::If(Expr::var(&self.flag_var), body, Vec::new()));
        out
    }

    pub fn to_dimacs(&self) -> String {
        self.cnf.to_dimacs(&format!("opaque predicate {} {}", self.array_var, self.flag_var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{eliminate_dead_code, interpret, parse, render, Function, DEFAULT_FUEL};

    fn host_with_guard(pred: &OpaquePredicate) -> (crate::minilang::Program, crate::minilang::Program) {
        let host = parse(
            "manifest {\n capability INTERNET\n}\nentry M.main\nclass M {\n fn main(x) {\n let y = rand_int(100);\n emit x + y;\n return x;\n }\n}\n",
        )
        .unwrap();
        let mut guarded = host.clone();
        let body = vec![Stmt::Api("net.send".into(), vec![Expr::var("x")]), Stmt::Emit(Expr::Int(-1))];
        let main: &mut Function = guarded.classes[0].functions.get_mut(0).unwrap();
        let tail = main.body.split_off(1);
        main.body.extend(pred.guard(body));
        main.body.extend(tail);
        (host, guarded)
    }

    #[test]
    fn emitted_formula_is_unsat_and_filtered() {
        for seed in 0..20 {
            let p = generate_opaque_predicate(&OpaqueParams::default(), seed);
            assert!(!p.cnf.is_horn() && !p.cnf.is_2sat_reducible());
            assert_eq!(is_satisfiable(&p.cnf, u64::MAX), SatOutcome::Unsat);
            assert!((36..=44).contains(&p.cnf.n), "{}", p.cnf.n);
            assert!((165..=203).contains(&p.cnf.m()), "{}", p.cnf.m());
        }
    }

    #[test]
    fn guard_never_fires_and_trace_is_unchanged() {
        let pred = generate_opaque_predicate(&OpaqueParams::default(), 7);
        let (host, guarded) = host_with_guard(&pred);
        for seed in 0..2_000 {
            let t = interpret(&guarded, 3, seed, DEFAULT_FUEL).unwrap();
            assert_eq!(t, interpret(&host, 3, seed, DEFAULT_FUEL).unwrap());
        }
    }

    #[test]
    fn dead_code_pass_keeps_guarded_block() {
        let pred = generate_opaque_predicate(&OpaqueParams::default(), 9);
        let (_, guarded) = host_with_guard(&pred);
        assert_eq!(eliminate_dead_code(&guarded), guarded);
        let reparsed = parse(&render(&guarded)).unwrap();
        assert_eq!(reparsed, guarded);
    }

    #[test]
    fn emissions_differ_across_seeds() {
        let mut seen = BTreeSet::new();
        for seed in 0..200 {
            let p = generate_opaque_predicate(&OpaqueParams::default(), seed);
            assert!(seen.insert(p.to_dimacs()));
        }
    }

    #[test]
    fn renaming_avoids_host_names() {
        let mut p = generate_opaque_predicate(&OpaqueParams::default(), 1);
        let taken = BTreeSet::from([p.array_var.clone(), p.flag_var.clone()]);
        p.avoid_names(&taken);
        assert!(!taken.contains(&p.array_var) && !taken.contains(&p.flag_var));
    }
}
