//! Gadget extraction: locate an occurrence of a feature in a donor, slice
//! backwards for the vein and close forward over callees for the organ.

use std::collections::{BTreeMap, BTreeSet};

use crate::features::FeatureVector;
use crate::minilang::graph::{flatten, stmt_at};
use crate::minilang::{
    feature_names, registry, walk_block, CallTarget, Class, ComponentKind, DependencyGraph, Expr,
    Manifest, Program, SoftwareStats, Stmt, StmtRef,
};

use super::TransplantError;

/// A harvested organ with the code that reaches it.
#[derive(Clone, Debug, PartialEq)]
pub struct Gadget {
    pub id: String,
    pub donor: String,
    /// Vocabulary position of the feature the gadget was harvested for.
    pub target_feature: usize,
    pub target_name: String,
    /// The statement in the donor where the feature occurs.
    pub entry_point: StmtRef,
    /// Donor classes reached from the vein, closed over calls.
    pub organ: Vec<Class>,
    /// Straight-line code ending in the occurrence statement.
    pub vein: Vec<Stmt>,
    /// The vein was synthesized because no call site existed in the donor.
    pub adapted_vein: bool,
    pub manifest_delta: Manifest,
    /// Features the gadget brings to the minimal host; filled at harvest.
    pub r: FeatureVector,
    pub stats: SoftwareStats,
}

/// Class name used when a gadget is stored as a standalone program.
pub const VEIN_CLASS: &str = "__Vein";
pub const VEIN_FUNCTION: &str = "vein";

impl Gadget {
    /// Standalone program: the organ classes plus the vein wrapped in its own
    /// class as entry, under the manifest delta.
    pub fn as_program(&self) -> Program {
        let mut classes = self.organ.clone();
        classes.push(Class {
            name: VEIN_CLASS.into(),
            functions: vec![crate::minilang::Function::new(VEIN_FUNCTION, vec!["input".into()], self.vein.clone())],
        });
        Program {
            manifest: self.manifest_delta.clone(),
            entry: CallTarget::new(VEIN_CLASS, VEIN_FUNCTION),
            classes,
        }
    }

    /// Capabilities the gadget would add to a host already holding `present`.
    pub fn new_capabilities<'a>(&'a self, present: &'a BTreeSet<String>) -> impl Iterator<Item = &'a String> {
        self.manifest_delta.capabilities.iter().filter(move |c| !present.contains(*c))
    }
}

enum Target<'a> {
    Api(&'a str),
    Capability(&'a str),
    Component(&'a str),
    Endpoint(&'a str),
}

fn parse_target(feature: &str) -> Result<Target<'_>, TransplantError> {
    let (prefix, rest) = feature
        .split_once("::")
        .ok_or_else(|| TransplantError::NotFound(feature.to_string()))?;
    Ok(match prefix {
        "api" => Target::Api(rest),
        "capability" => Target::Capability(rest),
        "url" => Target::Endpoint(rest),
        "intent" => return Err(TransplantError::IntentRejected(feature.to_string())),
        other => match ComponentKind::from_keyword(other) {
            Some(_) => Target::Component(rest),
            None => return Err(TransplantError::NotFound(feature.to_string())),
        },
    })
}

fn matches(target: &Target<'_>, s: &Stmt, in_class: &str) -> bool {
    match target {
        Target::Api(name) => matches!(s, Stmt::Api(n, _) if n == name),
        Target::Capability(cap) => {
            matches!(s, Stmt::Api(n, _) if registry::required_capability(n) == Some(*cap))
        }
        Target::Component(class) => {
            in_class != *class && s.direct_calls().iter().any(|t| t.class == *class)
        }
        Target::Endpoint(url) => s.string_literals().contains(url),
    }
}

/// Extract a gadget for `feature` (a feature name at vocabulary position
/// `position`) from `donor`.
pub fn extract_gadget(
    donor: &Program,
    donor_id: &str,
    feature: &str,
    position: usize,
) -> Result<Gadget, TransplantError> {
    let target = parse_target(feature)?;
    if !feature_names(donor).contains(feature) {
        return Err(TransplantError::NotFound(feature.to_string()));
    }
    let graph = DependencyGraph::build(donor);
    let live = graph.reachable_functions(&[donor.entry.clone()]);

    let mut occurrence = None;
    'search: for (c, f) in donor.functions() {
        let here = CallTarget::new(&c.name, &f.name);
        if !live.contains(&here) {
            continue;
        }
        for (path, s) in flatten(&f.body) {
            if matches(&target, s, &c.name) {
                occurrence = Some(StmtRef { function: here, path });
                break 'search;
            }
        }
    }

    let (entry_point, vein, adapted) = match occurrence {
        Some(at) => {
            // Enter through a call of the enclosing function when there is
            // one, so the organ carries that function.
            let vein = match call_site(donor, &live, &at.function) {
                Some(site) => build_vein(donor, &graph, &site),
                None => build_vein(donor, &graph, &at),
            };
            (at, vein, false)
        }
        None => match target {
            Target::Component(class) => {
                let (at, vein) = adapted_vein(donor, class)
                    .ok_or_else(|| TransplantError::NotFound(feature.to_string()))?;
                (at, vein, true)
            }
            _ => return Err(TransplantError::NotFound(feature.to_string())),
        },
    };

    let organ = organ_closure(donor, &vein);
    let manifest_delta = manifest_delta(donor, &organ, &vein);
    let mut g = Gadget {
        id: format!("g{position}-{donor_id}"),
        donor: donor_id.to_string(),
        target_feature: position,
        target_name: feature.to_string(),
        entry_point,
        organ,
        vein,
        adapted_vein: adapted,
        manifest_delta,
        r: FeatureVector::empty(0),
        stats: SoftwareStats::default(),
    };
    g.stats = crate::minilang::stats(&g.as_program());
    Ok(g)
}

/// First live statement outside `callee` that calls it.
fn call_site(donor: &Program, live: &BTreeSet<CallTarget>, callee: &CallTarget) -> Option<StmtRef> {
    if *callee == donor.entry {
        return None;
    }
    for (c, f) in donor.functions() {
        let here = CallTarget::new(&c.name, &f.name);
        if here == *callee || !live.contains(&here) {
            continue;
        }
        for (path, s) in flatten(&f.body) {
            if s.direct_calls().contains(&callee) {
                return Some(StmtRef { function: here, path });
            }
        }
    }
    None
}

/// Backward def-use slice of the occurrence inside its function, followed by
/// the occurrence itself. Parameters the slice reads become zero placeholders.
fn build_vein(donor: &Program, graph: &DependencyGraph, at: &StmtRef) -> Vec<Stmt> {
    let f = donor.function(&at.function).expect("occurrence function exists");
    let mut stmts: Vec<Stmt> = graph
        .backward_defs(at)
        .iter()
        .filter_map(|r| stmt_at(&f.body, &r.path).cloned())
        .collect();
    let occ = stmt_at(&f.body, &at.path).expect("occurrence statement exists").clone();
    stmts.push(match occ {
        // The vein must not leave the host function or nest blocks.
        Stmt::Return(e) => Stmt::Emit(e),
        Stmt::If(c, ..) | Stmt::While(c, _) => Stmt::Emit(c),
        other => other,
    });
    let mut defined: BTreeSet<&str> = BTreeSet::new();
    let mut free: Vec<String> = Vec::new();
    for s in &stmts {
        for v in s.uses() {
            if !defined.contains(v) && !free.iter().any(|x| x == v) {
                free.push(v.to_string());
            }
        }
        if let Some(v) = s.defines() {
            defined.insert(v);
        }
    }
    let mut vein: Vec<Stmt> = free.into_iter().map(|v| Stmt::Assign(v, Expr::Int(0))).collect();
    vein.extend(stmts);
    vein
}

/// Minimal construct-and-invoke block for a component class with no call
/// site in the donor.
fn adapted_vein(donor: &Program, class: &str) -> Option<(StmtRef, Vec<Stmt>)> {
    let c = donor.class(class)?;
    let f = c.functions.first()?;
    let target = CallTarget::new(class, &f.name);
    let arg = "intent_arg".to_string();
    let vein = vec![
        Stmt::Assign(arg.clone(), Expr::Int(0)),
        Stmt::Call(target.clone(), f.params.iter().map(|_| Expr::var(&arg)).collect()),
    ];
    Some((StmtRef { function: target, path: Vec::new() }, vein))
}

fn calls_in(block: &[Stmt]) -> Vec<CallTarget> {
    let mut out = Vec::new();
    walk_block(block, &mut |s| out.extend(s.direct_calls().into_iter().cloned()));
    out
}

/// Donor functions reachable from the vein's calls, grouped by class in
/// donor order. Unreached functions are left behind so that every organ
/// function stays live once the vein is implanted.
fn organ_closure(donor: &Program, vein: &[Stmt]) -> Vec<Class> {
    let mut seen: BTreeSet<CallTarget> = BTreeSet::new();
    let mut stack = calls_in(vein);
    while let Some(t) = stack.pop() {
        let Some(f) = donor.function(&t) else { continue };
        if seen.insert(t) {
            stack.extend(calls_in(&f.body));
        }
    }
    donor
        .classes
        .iter()
        .filter_map(|c| {
            let functions: Vec<_> = c
                .functions
                .iter()
                .filter(|f| seen.contains(&CallTarget::new(&c.name, &f.name)))
                .cloned()
                .collect();
            (!functions.is_empty()).then(|| Class { name: c.name.clone(), functions })
        })
        .collect()
}

fn manifest_delta(donor: &Program, organ: &[Class], vein: &[Stmt]) -> Manifest {
    let mut api_names: BTreeSet<String> = BTreeSet::new();
    let mut lits: BTreeSet<String> = BTreeSet::new();
    let mut collect = |block: &[Stmt]| {
        walk_block(block, &mut |s| {
            if let Stmt::Api(n, _) = s {
                api_names.insert(n.clone());
            }
            lits.extend(s.string_literals().into_iter().map(str::to_string));
        })
    };
    collect(vein);
    for c in organ {
        for f in &c.functions {
            collect(&f.body);
        }
    }
    let components: BTreeMap<String, ComponentKind> = organ
        .iter()
        .filter_map(|c| donor.manifest.components.get(&c.name).map(|k| (c.name.clone(), *k)))
        .collect();
    Manifest {
        capabilities: api_names
            .iter()
            .filter_map(|a| registry::required_capability(a))
            .map(str::to_string)
            .collect(),
        components,
        intents: BTreeSet::new(),
        endpoints: donor.manifest.endpoints.iter().filter(|e| lits.contains(*e)).cloned().collect(),
    }
}
