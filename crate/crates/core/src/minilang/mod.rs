//! The problem space: a small program language with a manifest, classes of
//! functions, a deterministic interpreter, static analyses, the
//! preprocessing pass and the feature mapping.

mod analysis;
mod ast;
mod dce;
pub mod graph;
mod interp;
mod parser;
mod phi;
pub mod registry;
mod render;

pub use analysis::{cc_profile, check_well_formed, cyclomatic_complexity, stats, SoftwareStats, WellFormedError};
pub use ast::*;
pub use dce::eliminate_dead_code;
pub use graph::{DepEdge, DepNode, DependencyGraph, StmtRef};
pub use interp::{interpret, interpret_case, RuntimeError, TestInput, Trace, Value, DEFAULT_FUEL};
pub use parser::{is_reserved, parse, parse_block, ParseError};
pub use phi::{
    api_feature, capability_feature, component_feature, endpoint_feature, extract_features,
    feature_names, intent_feature,
};
pub use render::{expr_str, render, render_block};

use std::collections::BTreeSet;

/// Features of `p` that `eliminate_dead_code` would remove.
pub fn features_lost_to_dce(p: &Program) -> BTreeSet<String> {
    let before = feature_names(p);
    let after = feature_names(&eliminate_dead_code(p));
    before.difference(&after).cloned().collect()
}

/// Source of the minimal host program used to measure gadget side effects.
pub const MINIMAL_PROGRAM: &str = "manifest {
  component activity MainActivity
  intent android.intent.action.MAIN
  intent android.intent.category.LAUNCHER
}
entry MainActivity.main

class MainActivity {
  fn main(input) {
    return input;
  }
}
";

/// The minimal host: one launcher activity whose entry returns its input.
pub fn minimal_program() -> Program {
    parse(MINIMAL_PROGRAM).expect("minimal program parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program_has_three_baseline_features() {
        let p = minimal_program();
        let names: Vec<String> = feature_names(&p).into_iter().collect();
        assert_eq!(
            names,
            vec![
                "activity::MainActivity",
                "intent::android.intent.action.MAIN",
                "intent::android.intent.category.LAUNCHER"
            ]
        );
        assert_eq!(check_well_formed(&p), Ok(()));
        assert_eq!(eliminate_dead_code(&p), p);
        let s = stats(&p);
        assert_eq!((s.size, s.avg_cc, s.capabilities, s.api_calls), (1, 1.0, 0, 0));
        assert_eq!(render(&p), MINIMAL_PROGRAM);
    }
}
