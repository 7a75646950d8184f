use std::fmt::Write;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lit {
    pub var: u32,
    pub negated: bool,
}

impl Lit {
    pub fn pos(var: u32) -> Self {
        Self { var, negated: false }
    }

    pub fn neg(var: u32) -> Self {
        Self { var, negated: true }
    }

    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var as usize] != self.negated
    }
}

/// 3-CNF formula over variables `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cnf3 {
    pub n: usize,
    pub clauses: Vec<[Lit; 3]>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("missing 'p cnf' header")]
    MissingHeader,
    #[error("line {0}: {1}")]
    Malformed(usize, String),
}

impl Cnf3 {
    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| l.eval(assignment)))
    }

    /// Horn formula: every clause has at most one positive literal.
    pub fn is_horn(&self) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().filter(|l| !l.negated).count() <= 1)
    }

    /// Some clause mentions fewer than three distinct variables, so it
    /// collapses to a 2-clause (or a tautology).
    pub fn is_2sat_reducible(&self) -> bool {
        self.clauses.iter().any(|c| {
            c[0].var == c[1].var || c[0].var == c[2].var || c[1].var == c[2].var
        })
    }

    pub fn is_well_formed(&self) -> bool {
        self.clauses.iter().all(|c| c.iter().all(|l| (l.var as usize) < self.n))
    }

    pub fn to_dimacs(&self, comment: &str) -> String {
        let mut out = String::new();
        for line in comment.lines() {
            let _ = writeln!(out, "c {line}");
        }
        let _ = writeln!(out, "p cnf {} {}", self.n, self.m());
        for c in &self.clauses {
            for l in c {
                let v = l.var as i64 + 1;
                let _ = write!(out, "{} ", if l.negated { -v } else { v });
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn from_dimacs(text: &str) -> Result<Self, DimacsError> {
        let mut n = None;
        let mut clauses = Vec::new();
        let mut pending: Vec<Lit> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("p cnf") {
                let nums: Vec<usize> = rest
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| DimacsError::Malformed(i + 1, line.into())))
                    .collect::<Result<_, _>>()?;
                if nums.len() != 2 {
                    return Err(DimacsError::Malformed(i + 1, line.into()));
                }
                n = Some(nums[0]);
                continue;
            }
            let nvars = n.ok_or(DimacsError::MissingHeader)?;
            for tok in line.split_whitespace() {
                let v: i64 = tok.parse().map_err(|_| DimacsError::Malformed(i + 1, tok.into()))?;
                if v == 0 {
                    let clause: [Lit; 3] = pending
                        .as_slice()
                        .try_into()
                        .map_err(|_| DimacsError::Malformed(i + 1, "clause is not 3-literal".into()))?;
                    clauses.push(clause);
                    pending.clear();
                } else {
                    let var = v.unsigned_abs() as usize - 1;
                    if var >= nvars {
                        return Err(DimacsError::Malformed(i + 1, format!("variable {v} out of range")));
                    }
                    pending.push(Lit { var: var as u32, negated: v < 0 });
                }
            }
        }
        let n = n.ok_or(DimacsError::MissingHeader)?;
        Ok(Cnf3 { n, clauses })
    }
}

/// Fixed clause-length Random 3-SAT: each clause takes 3 distinct variables
/// uniformly without replacement and negates each with probability 1/2. No
/// filtering.
pub fn random_3sat_raw<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Cnf3 {
    assert!(n >= 3, "need at least three variables");
    let clauses = (0..m)
        .map(|_| {
            let vars = sample(rng, n, 3);
            let mut lits = [Lit::pos(0); 3];
            for (slot, v) in lits.iter_mut().zip(vars.iter()) {
                *slot = Lit { var: v as u32, negated: rng.gen_bool(0.5) };
            }
            lits
        })
        .collect();
    Cnf3 { n, clauses }
}
