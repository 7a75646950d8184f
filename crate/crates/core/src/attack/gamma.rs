//! Problem-space constraint checks on an (original, adversarial) pair.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::minilang::{
    check_well_formed, eliminate_dead_code, feature_names, interpret_case, parse, render, Program,
    Stmt, TestInput,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// Only additions were made.
    Transformations,
    /// Observable behaviour is unchanged on the test inputs.
    Semantics,
    /// The result is a valid, runnable program.
    Plausibility,
    /// The preprocessing pass leaves the features intact.
    Robustness,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Transformations => "T",
            Constraint::Semantics => "Upsilon",
            Constraint::Plausibility => "Pi",
            Constraint::Robustness => "Lambda",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaReport {
    pub transformations: bool,
    pub semantics: bool,
    pub plausibility: bool,
    pub robustness: bool,
}

impl GammaReport {
    pub fn passed(&self) -> bool {
        self.first_violation().is_none()
    }

    pub fn first_violation(&self) -> Option<Constraint> {
        [
            (self.transformations, Constraint::Transformations),
            (self.semantics, Constraint::Semantics),
            (self.plausibility, Constraint::Plausibility),
            (self.robustness, Constraint::Robustness),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, c)| c)
    }
}

/// Check all four constraints; `inputs` are the behavioural test cases and
/// `fuel` bounds each run.
pub fn verify_gamma(original: &Program, adversarial: &Program, inputs: &[TestInput], fuel: u64) -> GammaReport {
    GammaReport {
        transformations: additions_only(original, adversarial),
        semantics: same_behaviour(original, adversarial, inputs, fuel),
        plausibility: plausible(adversarial, inputs.first().copied(), fuel),
        robustness: robust(adversarial),
    }
}

fn is_subsequence(small: &[Stmt], big: &[Stmt]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

pub fn additions_only(z: &Program, z2: &Program) -> bool {
    let m = &z.manifest;
    let m2 = &z2.manifest;
    let manifest_ok = m.capabilities.is_subset(&m2.capabilities)
        && m.intents.is_subset(&m2.intents)
        && m.endpoints.is_subset(&m2.endpoints)
        && m.components.iter().all(|(n, k)| m2.components.get(n) == Some(k));
    let code_ok = z.entry == z2.entry
        && z.classes.iter().all(|c| {
            z2.class(&c.name).is_some_and(|c2| {
                c.functions.iter().all(|f| {
                    c2.function(&f.name)
                        .is_some_and(|f2| f.params == f2.params && is_subsequence(&f.body, &f2.body))
                })
            })
        });
    manifest_ok
        && code_ok
        && z2.statement_count() >= z.statement_count()
        && feature_names(z2).is_superset(&feature_names(z))
}

pub fn same_behaviour(z: &Program, z2: &Program, inputs: &[TestInput], fuel: u64) -> bool {
    inputs.iter().all(|&t| match (interpret_case(z, t, fuel), interpret_case(z2, t, fuel)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    })
}

pub fn plausible(z2: &Program, probe: Option<TestInput>, fuel: u64) -> bool {
    let round_trip = parse(&render(z2)).is_ok_and(|p| &p == z2);
    let probe = probe.unwrap_or(TestInput { input: 0, seed: 0 });
    round_trip && check_well_formed(z2).is_ok() && interpret_case(z2, probe, fuel).is_ok()
}

pub fn robust(z2: &Program) -> bool {
    let reduced = eliminate_dead_code(z2);
    feature_names(&reduced) == feature_names(z2) && reduced.manifest.capabilities == z2.manifest.capabilities
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::DEFAULT_FUEL;

    const HOST: &str = "manifest {\n  capability INTERNET\n  component activity MainActivity\n}\nentry MainActivity.main\n\nclass MainActivity {\n  fn main(input) {\n    api net.open(input);\n    emit input;\n    return input;\n  }\n}\n";

    fn inputs() -> Vec<TestInput> {
        (0..8).map(|i| TestInput { input: i * 3, seed: i as u64 }).collect()
    }

    #[test]
    fn identical_program_passes() {
        let z = parse(HOST).unwrap();
        assert!(verify_gamma(&z, &z, &inputs(), DEFAULT_FUEL).passed());
    }

    #[test]
    fn literal_false_guard_is_a_robustness_violation() {
        let z = parse(HOST).unwrap();
        let z2 = parse(&HOST.replace("    emit input;\n", "    emit input;\n    if 0 == 1 {\n      api ui.banner(input);\n    }\n")).unwrap();
        let r = verify_gamma(&z, &z2, &inputs(), DEFAULT_FUEL);
        assert_eq!(r.first_violation(), Some(Constraint::Robustness), "{r:?}");
    }

    #[test]
    fn unused_capability_is_a_robustness_violation() {
        let z = parse(HOST).unwrap();
        let z2 = parse(&HOST.replace("  capability INTERNET\n", "  capability INTERNET\n  capability NFC\n")).unwrap();
        assert_eq!(verify_gamma(&z, &z2, &inputs(), DEFAULT_FUEL).first_violation(), Some(Constraint::Robustness));
    }

    #[test]
    fn removed_statement_is_a_transformation_violation() {
        let z = parse(HOST).unwrap();
        let z2 = parse(&HOST.replace("    emit input;\n", "")).unwrap();
        let r = verify_gamma(&z, &z2, &inputs(), DEFAULT_FUEL);
        assert!(!r.transformations);
        assert_eq!(r.first_violation(), Some(Constraint::Transformations));
    }

    #[test]
    fn visible_change_is_a_semantics_violation() {
        let z = parse(HOST).unwrap();
        let z2 = parse(&HOST.replace("    emit input;\n", "    emit input;\n    emit 1;\n")).unwrap();
        assert_eq!(verify_gamma(&z, &z2, &inputs(), DEFAULT_FUEL).first_violation(), Some(Constraint::Semantics));
    }

    #[test]
    fn runtime_failure_is_a_plausibility_violation() {
        let z = parse(HOST).unwrap();
        let z2 = parse(&HOST.replace("    return input;\n", "    return input;\n")
            .replace("    api net.open(input);\n", "    api net.open(input);\n    let q = rand_int(2);\n    if q > 5 {\n      emit 0;\n    }\n"))
        .unwrap();
        assert!(verify_gamma(&z, &z2, &inputs(), DEFAULT_FUEL).plausibility);
        let broken = parse(&HOST.replace("    emit input;\n", "    emit input;\n    while input == input {\n      let input = input;\n    }\n")).unwrap();
        let r = verify_gamma(&z, &broken, &inputs(), 10_000);
        assert!(!r.plausibility && !r.semantics);
    }
}
