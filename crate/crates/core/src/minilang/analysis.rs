//! Static checks and software metrics.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::parser::is_reserved;
use super::registry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WellFormedError {
    #[error("entry function {0} is not defined")]
    MissingEntry(String),
    #[error("entry function {0} must take exactly one parameter")]
    EntryArity(String),
    #[error("duplicate class '{0}'")]
    DuplicateClass(String),
    #[error("duplicate function '{0}'")]
    DuplicateFunction(String),
    #[error("manifest component '{0}' has no class")]
    UnknownComponent(String),
    #[error("{caller} calls undefined function {target}")]
    UndefinedReference { caller: String, target: String },
    #[error("{caller} calls {target} with {given} arguments, expected {expected}")]
    ArityMismatch { caller: String, target: String, given: usize, expected: usize },
    #[error("variable '{var}' may be used before definition in {function}")]
    UndeclaredVariable { function: String, var: String },
    #[error("api '{api}' in {function} needs capability {capability} missing from the manifest")]
    MissingCapability { function: String, api: String, capability: String },
    #[error("reserved word '{0}' used as an identifier")]
    ReservedIdentifier(String),
}

/// Structural validity: resolvable entry, components, calls, capabilities,
/// and definite assignment of every variable read.
pub fn check_well_formed(p: &Program) -> Result<(), WellFormedError> {
    let mut classes = HashSet::new();
    for c in &p.classes {
        if !classes.insert(c.name.as_str()) {
            return Err(WellFormedError::DuplicateClass(c.name.clone()));
        }
        if is_reserved(&c.name) {
            return Err(WellFormedError::ReservedIdentifier(c.name.clone()));
        }
        let mut fns = HashSet::new();
        for f in &c.functions {
            if !fns.insert(f.name.as_str()) {
                return Err(WellFormedError::DuplicateFunction(format!("{}.{}", c.name, f.name)));
            }
        }
    }
    match p.entry_function() {
        None => return Err(WellFormedError::MissingEntry(p.entry.to_string())),
        Some(f) if f.params.len() != 1 => {
            return Err(WellFormedError::EntryArity(p.entry.to_string()))
        }
        Some(_) => {}
    }
    for name in p.manifest.components.keys() {
        if p.class(name).is_none() {
            return Err(WellFormedError::UnknownComponent(name.clone()));
        }
    }
    for (c, f) in p.functions() {
        let caller = format!("{}.{}", c.name, f.name);
        for name in f.params.iter().chain(std::iter::once(&f.name)) {
            if is_reserved(name) {
                return Err(WellFormedError::ReservedIdentifier(name.clone()));
            }
        }
        let mut err = None;
        walk_block(&f.body, &mut |s| {
            if err.is_some() {
                return;
            }
            let mut calls: Vec<(&CallTarget, usize)> = Vec::new();
            if let Stmt::Call(t, args) = s {
                calls.push((t, args.len()));
            }
            for e in s.exprs() {
                e.walk(&mut |x| {
                    if let Expr::Call(t, args) = x {
                        calls.push((t, args.len()));
                    }
                });
            }
            for (t, given) in calls {
                match p.function(t) {
                    None => {
                        err = Some(WellFormedError::UndefinedReference {
                            caller: caller.clone(),
                            target: t.to_string(),
                        })
                    }
                    Some(g) if g.params.len() != given => {
                        err = Some(WellFormedError::ArityMismatch {
                            caller: caller.clone(),
                            target: t.to_string(),
                            given,
                            expected: g.params.len(),
                        })
                    }
                    _ => {}
                }
            }
            if let Stmt::Api(api, _) = s {
                if let Some(cap) = registry::required_capability(api) {
                    if !p.manifest.capabilities.contains(cap) {
                        err = Some(WellFormedError::MissingCapability {
                            function: caller.clone(),
                            api: api.clone(),
                            capability: cap.to_string(),
                        });
                    }
                }
            }
            if let Some(v) = s.defines() {
                if is_reserved(v) {
                    err = Some(WellFormedError::ReservedIdentifier(v.to_string()));
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let defined: BTreeSet<&str> = f.params.iter().map(String::as_str).collect();
        if let Err(var) = definitely_assigned(&f.body, defined) {
            return Err(WellFormedError::UndeclaredVariable { function: caller, var });
        }
    }
    Ok(())
}

/// Returns the set of variables defined on every path through `block`, or the
/// first variable read before being defined on some path.
fn definitely_assigned<'a>(
    block: &'a [Stmt],
    mut defined: BTreeSet<&'a str>,
) -> Result<BTreeSet<&'a str>, String> {
    for s in block {
        for v in s.uses() {
            if !defined.contains(v) {
                return Err(v.to_string());
            }
        }
        match s {
            Stmt::Assign(v, _) => {
                defined.insert(v);
            }
            Stmt::If(_, then, otherwise) => {
                let a = definitely_assigned(then, defined.clone())?;
                let b = definitely_assigned(otherwise, defined.clone())?;
                defined = a.intersection(&b).copied().collect();
            }
            Stmt::While(_, body) => {
                definitely_assigned(body, defined.clone())?;
            }
            _ => {}
        }
    }
    Ok(defined)
}

/// Decision-point cyclomatic complexity: 1 + number of `if`/`while`.
pub fn cyclomatic_complexity(f: &Function) -> usize {
    let mut n = 1;
    walk_block(&f.body, &mut |s| {
        if matches!(s, Stmt::If(..) | Stmt::While(..)) {
            n += 1;
        }
    });
    n
}

/// Per-function CC values in program order.
pub fn cc_profile(p: &Program) -> Vec<usize> {
    p.functions().map(|(_, f)| cyclomatic_complexity(f)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SoftwareStats {
    /// Statement count.
    pub size: usize,
    pub avg_cc: f64,
    pub capabilities: usize,
    /// Distinct api names.
    pub api_calls: usize,
    pub endpoints: usize,
    pub activities: usize,
    pub services_receivers: usize,
    pub intents: usize,
    pub providers: usize,
}

impl SoftwareStats {
    pub const FAMILIES: [&'static str; 9] = [
        "size",
        "avg_cc",
        "capabilities",
        "api_calls",
        "endpoints",
        "activities",
        "services_receivers",
        "intents",
        "providers",
    ];

    /// Values in [`Self::FAMILIES`] order.
    pub fn values(&self) -> [f64; 9] {
        [
            self.size as f64,
            self.avg_cc,
            self.capabilities as f64,
            self.api_calls as f64,
            self.endpoints as f64,
            self.activities as f64,
            self.services_receivers as f64,
            self.intents as f64,
            self.providers as f64,
        ]
    }
}

pub fn stats(p: &Program) -> SoftwareStats {
    let ccs = cc_profile(p);
    let avg_cc = if ccs.is_empty() {
        1.0
    } else {
        ccs.iter().sum::<usize>() as f64 / ccs.len() as f64
    };
    let kind_count =
        |k: ComponentKind| p.manifest.components.values().filter(|x| **x == k).count();
    SoftwareStats {
        size: p.statement_count(),
        avg_cc,
        capabilities: p.manifest.capabilities.len(),
        api_calls: p.api_names().len(),
        endpoints: p.manifest.endpoints.len(),
        activities: kind_count(ComponentKind::Activity),
        services_receivers: kind_count(ComponentKind::Service) + kind_count(ComponentKind::Receiver),
        intents: p.manifest.intents.len(),
        providers: kind_count(ComponentKind::Provider),
    }
}
