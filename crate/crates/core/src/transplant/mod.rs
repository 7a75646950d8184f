//! Organ harvesting and implantation.
//!
//! A gadget is cut from a benign donor around one occurrence of a feature:
//! the vein is the straight-line code computing the occurrence's inputs, the
//! organ is every donor function the vein reaches. Gadgets are measured on
//! the minimal host, stored in an ice-box, and implanted into hosts behind a
//! fresh opaque predicate.

mod gadget;
mod icebox;
mod implant;

use thiserror::Error;

pub use gadget::{extract_gadget, Gadget, VEIN_CLASS, VEIN_FUNCTION};
pub use icebox::{build_icebox, estimate_side_effects, HarvestLog, HarvestParams, IceBox};
pub use implant::{implant, implant_with, Implantation};

#[derive(Debug, Error)]
pub enum TransplantError {
    #[error("no extractable occurrence of {0}")]
    NotFound(String),
    #[error("{0} would add an externally triggered entry point")]
    IntentRejected(String),
    #[error("host is not well-formed: {0}")]
    HostMalformed(String),
    #[error("implanted program is not well-formed: {0}")]
    Malformed(String),
    #[error("host has no live function to receive the gadget")]
    NoInsertionPoint,
    #[error("ice-box was harvested under a different model or vocabulary")]
    StaleIceBox,
    #[error("ice-box store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::features::{FeatureVocabulary, LinearModel};
    use crate::minilang::{
        eliminate_dead_code, extract_features, feature_names, interpret, minimal_program, parse,
        CallTarget, Program, Stmt, DEFAULT_FUEL,
    };

    const DONOR: &str = "manifest {
  capability INTERNET
  capability VIBRATE
  component activity MainActivity
  component activity Gallery
  component service Sync
  endpoint \"https://cdn.example\"
}
entry MainActivity.main

class MainActivity {
  fn main(input) {
    let size = input * 2;
    let unused_label = \"hello\";
    call Gallery.open(size);
    let n = Sync.fetch(input);
    emit n;
    api ui.toast(unused_label);
    return input;
  }
}

class Gallery {
  fn open(k) {
    api ui.grid(k);
    call Gallery.thumb(k);
  }
  fn thumb(k) {
    api anim.fade(k);
  }
}

class Sync {
  fn fetch(v) {
    let url = \"https://cdn.example\";
    api net.get(url);
    api vibrate.buzz(v);
    return v + 1;
  }
}
";

    fn donor() -> Program {
        parse(DONOR).unwrap()
    }

    fn vocab_of(programs: &[&Program]) -> FeatureVocabulary {
        let mut names = BTreeSet::new();
        for p in programs {
            names.extend(feature_names(p));
        }
        FeatureVocabulary::new(names).unwrap()
    }

    fn organ_names(g: &Gadget) -> BTreeSet<CallTarget> {
        g.organ
            .iter()
            .flat_map(|c| c.functions.iter().map(move |f| CallTarget::new(&c.name, &f.name)))
            .collect()
    }

    /// Functions called, transitively, from a block of statements.
    fn naive_callees(p: &Program, block: &[Stmt]) -> BTreeSet<CallTarget> {
        let mut found = BTreeSet::new();
        let mut frontier: Vec<CallTarget> = Vec::new();
        crate::minilang::walk_block(block, &mut |s| frontier.extend(s.direct_calls().into_iter().cloned()));
        while let Some(t) = frontier.pop() {
            if let Some(f) = p.function(&t) {
                if found.insert(t) {
                    crate::minilang::walk_block(&f.body, &mut |s| {
                        frontier.extend(s.direct_calls().into_iter().cloned())
                    });
                }
            }
        }
        found
    }

    #[test]
    fn component_gadget_carries_class_and_argument_slice() {
        let p = donor();
        let g = extract_gadget(&p, "d0", "activity::Gallery", 0).unwrap();
        assert!(!g.adapted_vein);
        assert_eq!(
            organ_names(&g),
            BTreeSet::from([CallTarget::new("Gallery", "open"), CallTarget::new("Gallery", "thumb")])
        );
        assert_eq!(organ_names(&g), naive_callees(&p, &g.vein));
        let mut vein = String::new();
        crate::minilang::render_block(&g.vein, 0, &mut vein);
        assert_eq!(vein, "let input = 0;\nlet size = input * 2;\ncall Gallery.open(size);\n");
        assert_eq!(g.manifest_delta.components.len(), 1);
        assert!(g.manifest_delta.capabilities.is_empty());
    }

    #[test]
    fn capability_gadget_contains_the_using_function() {
        let p = donor();
        let g = extract_gadget(&p, "d0", "capability::INTERNET", 0).unwrap();
        assert!(organ_names(&g).contains(&CallTarget::new("Sync", "fetch")));
        assert_eq!(
            g.manifest_delta.capabilities,
            BTreeSet::from(["INTERNET".to_string(), "VIBRATE".to_string()])
        );
        assert_eq!(g.manifest_delta.endpoints.len(), 1);
    }

    #[test]
    fn absent_feature_and_intents_are_rejected() {
        let p = donor();
        assert!(matches!(extract_gadget(&p, "d0", "api::cam.snap", 0), Err(TransplantError::NotFound(_))));
        let z = minimal_program();
        assert!(matches!(
            extract_gadget(&z, "z", "intent::android.intent.action.MAIN", 0),
            Err(TransplantError::IntentRejected(_))
        ));
    }

    #[test]
    fn adapted_vein_when_component_is_never_called() {
        let text = "manifest {\n  component activity MainActivity\n  component receiver Boot\n}\nentry MainActivity.main\n\nclass MainActivity {\n  fn main(input) {\n    emit input;\n  }\n}\n\nclass Boot {\n  fn on(a, b) {\n    api ui.note(a);\n  }\n}\n";
        let p = parse(text).unwrap();
        let g = extract_gadget(&p, "d", "receiver::Boot", 0).unwrap();
        assert!(g.adapted_vein);
        let z = implant(&minimal_program(), &g, 3).unwrap();
        assert!(feature_names(&z).contains("receiver::Boot"));
    }

    #[test]
    fn side_effects_on_minimal_host() {
        let p = donor();
        let z = minimal_program();
        let vocab = vocab_of(&[&p, &z]);
        let clean = extract_gadget(&p, "d0", "activity::Gallery", vocab.position("activity::Gallery").unwrap()).unwrap();
        let r = estimate_side_effects(&clean, &z, &vocab).unwrap();
        assert_eq!(r.names(&vocab), vec!["activity::Gallery", "api::anim.fade", "api::ui.grid"]);

        let pos = vocab.position("api::net.get").unwrap();
        let noisy = extract_gadget(&p, "d0", "api::net.get", pos).unwrap();
        let r = estimate_side_effects(&noisy, &z, &vocab).unwrap();
        assert!(r.contains(pos));
        for extra in ["api::vibrate.buzz", "capability::VIBRATE", "service::Sync", "url::https://cdn.example"] {
            assert!(r.contains(vocab.position(extra).unwrap()), "{extra}");
        }
    }

    #[test]
    fn reimplanting_into_minimal_host_reproduces_estimate() {
        let p = donor();
        let z = minimal_program();
        let vocab = vocab_of(&[&p, &z]);
        let base = extract_features(&z, &vocab);
        for feature in ["activity::Gallery", "api::net.get", "url::https://cdn.example", "api::ui.toast"] {
            let g = extract_gadget(&p, "d0", feature, vocab.position(feature).unwrap()).unwrap();
            let r = estimate_side_effects(&g, &z, &vocab).unwrap();
            for seed in 0..5 {
                let out = implant(&z, &g, seed).unwrap();
                assert_eq!(extract_features(&out, &vocab), base.union(&r).unwrap(), "{feature}");
            }
        }
    }

    #[test]
    fn implant_preserves_traces_features_and_dead_code_stability() {
        let p = donor();
        let host = parse(
            "manifest {\n  capability INTERNET\n  component activity MainActivity\n}\nentry MainActivity.main\n\nclass MainActivity {\n  fn main(input) {\n    let r = rand_int(50);\n    if input > r {\n      api net.post(input);\n    }\n    call Worker.step(input);\n    return r;\n  }\n}\n\nclass Worker {\n  fn step(v) {\n    let i = 0;\n    while i < 3 {\n      emit v + i;\n      let i = i + 1;\n    }\n  }\n}\n",
        )
        .unwrap();
        for (k, feature) in ["activity::Gallery", "api::net.get", "service::Sync"].iter().enumerate() {
            let g = extract_gadget(&p, "d0", feature, k).unwrap();
            for seed in 0..10 {
                let out = implant(&host, &g, seed).unwrap();
                let before = feature_names(&host);
                let after = feature_names(&out);
                assert!(after.is_superset(&before));
                assert!(after.contains(*feature));
                assert_eq!(feature_names(&eliminate_dead_code(&out)), after);
                for run in 0..20 {
                    assert_eq!(
                        interpret(&out, run as i64 * 7, run, DEFAULT_FUEL).unwrap(),
                        interpret(&host, run as i64 * 7, run, DEFAULT_FUEL).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn side_effects_depend_on_host_through_name_collisions() {
        let p = donor();
        let g = extract_gadget(&p, "d0", "service::Sync", 0).unwrap();
        let plain = minimal_program();
        let clashing = parse(
            "manifest {\n  component activity MainActivity\n  component service Sync\n}\nentry MainActivity.main\n\nclass MainActivity {\n  fn main(input) {\n    let a = Sync.fetch(input);\n    return a;\n  }\n}\n\nclass Sync {\n  fn fetch(q) {\n    return q * 3;\n  }\n}\n",
        )
        .unwrap();
        let delta = |host: &Program| -> BTreeSet<String> {
            let out = implant(host, &g, 1).unwrap();
            feature_names(&out).difference(&feature_names(host)).cloned().collect()
        };
        let d1 = delta(&plain);
        let d2 = delta(&clashing);
        assert!(d1.contains("service::Sync"));
        assert!(d2.contains("service::Sync_1"));
        assert_ne!(d1, d2);
        let out = implant_with(&clashing, &g, 1, &Default::default()).unwrap();
        assert_eq!(out.renamed.get("Sync").map(String::as_str), Some("Sync_1"));
        for seed in 0..20 {
            assert_eq!(
                interpret(&out.program, 4, seed, DEFAULT_FUEL).unwrap(),
                interpret(&clashing, 4, seed, DEFAULT_FUEL).unwrap()
            );
        }
    }

    #[test]
    fn icebox_harvest_store_and_reload() {
        let p = donor();
        let z = minimal_program();
        let vocab = vocab_of(&[&p, &z]);
        let mut w = vec![0.0; vocab.len()];
        w[vocab.position("activity::Gallery").unwrap()] = -2.0;
        w[vocab.position("api::ui.toast").unwrap()] = -1.0;
        w[vocab.position("api::net.get").unwrap()] = -0.5;
        w[vocab.position("api::vibrate.buzz").unwrap()] = 3.0;
        let model = LinearModel::new(w, -0.1, &vocab);
        let donors = vec![("d0".to_string(), p)];

        let one = HarvestParams { n_features: 1, ..HarvestParams::default() };
        let (ib, _) = build_icebox(&donors, &model, &vocab, &one, 5).unwrap();
        assert_eq!(ib.entries.keys().copied().collect::<Vec<_>>(), vec![vocab.position("activity::Gallery").unwrap()]);

        let (ib, log) = build_icebox(&donors, &model, &vocab, &HarvestParams::default(), 5).unwrap();
        assert!(ib.is_sound(&model));
        assert_eq!(ib.entries.len(), 3);
        assert_eq!(log.discarded_positive, 1, "net.get drags in vibrate.buzz");
        assert!(ib.entries[&vocab.position("api::net.get").unwrap()].is_empty());

        let dir = tempfile::tempdir().unwrap();
        ib.save(dir.path(), &vocab).unwrap();
        let back = IceBox::load(dir.path(), &vocab).unwrap();
        assert_eq!(back, ib);
        assert!(back.check_model(&model).is_ok());
        let other = LinearModel::new(vec![0.0; vocab.len()], 0.0, &vocab);
        assert!(matches!(back.check_model(&other), Err(TransplantError::StaleIceBox)));
    }
}
