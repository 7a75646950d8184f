//! DPLL with unit propagation and pure-literal elimination, plus a bit-parallel
//! exhaustive satisfiability check for small variable counts.

use serde::{Deserialize, Serialize};

use super::cnf::Cnf3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SatOutcome {
    /// A verified model.
    Sat(Vec<bool>),
    Unsat,
    BudgetExceeded,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub decisions: u64,
    pub propagations: u64,
}

struct Solver<'a> {
    cnf: &'a Cnf3,
    assign: Vec<Option<bool>>,
    trail: Vec<usize>,
    budget: u64,
    stats: SolverStats,
}

enum Step {
    Sat,
    Unsat,
    OutOfBudget,
}

impl Solver<'_> {
    fn set(&mut self, var: usize, value: bool) {
        self.assign[var] = Some(value);
        self.trail.push(var);
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("trail non-empty");
            self.assign[v] = None;
        }
    }

    /// Unit propagation and pure-literal assignment to a fixpoint. Returns
    /// false on conflict.
    fn simplify(&mut self) -> bool {
        loop {
            let mut changed = false;
            // polarity seen among literals of unresolved clauses: bit0 pos, bit1 neg
            let mut polarity = vec![0u8; self.cnf.n];
            for clause in &self.cnf.clauses {
                let mut satisfied = false;
                let mut free = 0;
                let mut last = None;
                for l in clause {
                    match self.assign[l.var as usize] {
                        Some(v) if v != l.negated => {
                            satisfied = true;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            free += 1;
                            last = Some(*l);
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                match (free, last) {
                    (0, _) => return false,
                    (1, Some(l)) => {
                        if self.assign[l.var as usize].is_none() {
                            self.set(l.var as usize, !l.negated);
                            self.stats.propagations += 1;
                            changed = true;
                        }
                    }
                    _ => {
                        for l in clause {
                            if self.assign[l.var as usize].is_none() {
                                polarity[l.var as usize] |= if l.negated { 2 } else { 1 };
                            }
                        }
                    }
                }
            }
            if changed {
                continue;
            }
            for (v, p) in polarity.iter().enumerate() {
                if self.assign[v].is_none() && (*p == 1 || *p == 2) {
                    self.set(v, *p == 1);
                    changed = true;
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Unassigned variable occurring most often in unresolved clauses.
    fn branch_var(&self) -> Option<usize> {
        let mut counts = vec![0u32; self.cnf.n];
        let mut any_open = false;
        for clause in &self.cnf.clauses {
            if clause.iter().any(|l| self.assign[l.var as usize] == Some(!l.negated)) {
                continue;
            }
            any_open = true;
            for l in clause {
                if self.assign[l.var as usize].is_none() {
                    counts[l.var as usize] += 1;
                }
            }
        }
        if !any_open {
            return None;
        }
        (0..self.cnf.n)
            .filter(|&v| self.assign[v].is_none())
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
    }

    fn search(&mut self) -> Step {
        let mark = self.trail.len();
        if !self.simplify() {
            self.undo_to(mark);
            return Step::Unsat;
        }
        let Some(var) = self.branch_var() else {
            return Step::Sat;
        };
        for value in [true, false] {
            if self.stats.decisions >= self.budget {
                self.undo_to(mark);
                return Step::OutOfBudget;
            }
            self.stats.decisions += 1;
            let inner = self.trail.len();
            self.set(var, value);
            match self.search() {
                Step::Sat => return Step::Sat,
                Step::OutOfBudget => {
                    self.undo_to(mark);
                    return Step::OutOfBudget;
                }
                Step::Unsat => self.undo_to(inner),
            }
        }
        self.undo_to(mark);
        Step::Unsat
    }
}

/// Decide satisfiability within `budget` branching decisions.
pub fn is_satisfiable(cnf: &Cnf3, budget: u64) -> SatOutcome {
    solve_with_stats(cnf, budget).0
}

pub fn solve_with_stats(cnf: &Cnf3, budget: u64) -> (SatOutcome, SolverStats) {
    let mut s = Solver {
        cnf,
        assign: vec![None; cnf.n],
        trail: Vec::new(),
        budget,
        stats: SolverStats::default(),
    };
    let outcome = match s.search() {
        Step::Sat => {
            let model: Vec<bool> = s.assign.iter().map(|v| v.unwrap_or(false)).collect();
            assert!(cnf.eval(&model), "solver produced a non-model");
            SatOutcome::Sat(model)
        }
        Step::Unsat => SatOutcome::Unsat,
        Step::OutOfBudget => SatOutcome::BudgetExceeded,
    };
    (outcome, s.stats)
}

/// Largest variable count accepted by [`exhaustive_satisfiable`].
pub const EXHAUSTIVE_MAX_VARS: usize = 24;

/// Evaluate all `2^n` assignments at once with one bit per assignment.
pub fn exhaustive_satisfiable(cnf: &Cnf3) -> bool {
    let n = cnf.n;
    assert!(n <= EXHAUSTIVE_MAX_VARS, "exhaustive check limited to {EXHAUSTIVE_MAX_VARS} variables");
    // Bit i of the table is the value of a variable under assignment i.
    const LOW: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    let words = if n <= 6 { 1 } else { 1usize << (n - 6) };
    let valid_mask = if n >= 6 { u64::MAX } else { (1u64 << (1u32 << n)) - 1 };
    let column = |var: u32, word: usize| -> u64 {
        let v = var as usize;
        if v < 6 {
            LOW[v]
        } else if (word >> (v - 6)) & 1 == 1 {
            u64::MAX
        } else {
            0
        }
    };
    let mut table = vec![valid_mask; words];
    for clause in &cnf.clauses {
        let mut alive = false;
        for (w, slot) in table.iter_mut().enumerate() {
            if *slot == 0 {
                continue;
            }
            let mut c = 0u64;
            for l in clause {
                let col = column(l.var, w);
                c |= if l.negated { !col } else { col };
            }
            *slot &= c;
            alive |= *slot != 0;
        }
        if !alive {
            return false;
        }
    }
    table.iter().any(|w| *w != 0)
}
