//! Organ implantation into a host program.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::minilang::{
    cyclomatic_complexity, check_well_formed, walk_block, walk_block_mut, CallTarget, Class, Expr,
    Program, Stmt,
};
use crate::opaque::{generate_opaque_predicate, OpaqueParams, OpaquePredicate};

use super::{Gadget, TransplantError};

/// Where and how a gadget was inserted.
#[derive(Clone, Debug)]
pub struct Implantation {
    pub program: Program,
    pub predicate: OpaquePredicate,
    pub function: CallTarget,
    /// Top-level index of the first inserted statement.
    pub index: usize,
    /// Organ classes renamed to avoid collisions with the host.
    pub renamed: BTreeMap<String, String>,
}

pub fn implant(host: &Program, g: &Gadget, seed: u64) -> Result<Program, TransplantError> {
    implant_with(host, g, seed, &OpaqueParams::default()).map(|i| i.program)
}

pub fn implant_with(
    host: &Program,
    g: &Gadget,
    seed: u64,
    params: &OpaqueParams,
) -> Result<Implantation, TransplantError> {
    check_well_formed(host).map_err(|e| TransplantError::HostMalformed(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let live = crate::minilang::DependencyGraph::build(host).reachable_functions(&[host.entry.clone()]);

    let (renamed, organ, mut vein, delta) = merge_plan(host, g);
    let mut out = host.clone();
    out.classes.extend(organ);
    out.manifest.merge(&delta);

    let class = choose_host_class(&out, &live).ok_or(TransplantError::NoInsertionPoint)?;
    let candidates: Vec<&str> = out
        .class(&class)
        .expect("chosen class exists")
        .functions
        .iter()
        .filter(|f| live.contains(&CallTarget::new(&class, &f.name)))
        .map(|f| f.name.as_str())
        .collect();
    let fname = candidates[rng.gen_range(0..candidates.len())].to_string();
    let target = CallTarget::new(&class, &fname);

    let f = out
        .class_mut(&class)
        .and_then(|c| c.function_mut(&fname))
        .expect("chosen function exists");
    let limit = f
        .body
        .iter()
        .position(|s| matches!(s, Stmt::Return(_)))
        .unwrap_or(f.body.len());
    let index = rng.gen_range(0..=limit);

    let mut taken: BTreeSet<String> = f.params.iter().cloned().collect();
    collect_vars(&f.body, &mut taken);
    collect_vars(&vein, &mut taken);
    let mut predicate = generate_opaque_predicate(params, rng.gen());
    predicate.avoid_names(&taken);
    let guarded = predicate.guard(std::mem::take(&mut vein));
    f.body.splice(index..index, guarded);

    check_well_formed(&out).map_err(|e| TransplantError::Malformed(e.to_string()))?;
    Ok(Implantation { program: out, predicate, function: target, index, renamed })
}

fn collect_vars(block: &[Stmt], out: &mut BTreeSet<String>) {
    walk_block(block, &mut |s| {
        out.extend(s.uses().into_iter().map(str::to_string));
        if let Some(v) = s.defines() {
            out.insert(v.to_string());
        }
    });
}

/// Organ classes to add (renamed where they clash with a different host
/// class), the rewritten vein and the rewritten manifest delta.
fn merge_plan(
    host: &Program,
    g: &Gadget,
) -> (BTreeMap<String, String>, Vec<Class>, Vec<Stmt>, crate::minilang::Manifest) {
    let mut used: BTreeSet<String> = host.classes.iter().map(|c| c.name.clone()).collect();
    used.extend(g.organ.iter().map(|c| c.name.clone()));
    let mut renamed = BTreeMap::new();
    let mut keep = Vec::new();
    for c in &g.organ {
        match host.class(&c.name) {
            Some(existing) if existing == c => {}
            Some(_) => {
                let fresh = (1..)
                    .map(|k| format!("{}_{k}", c.name))
                    .find(|n| !used.contains(n))
                    .expect("unbounded suffixes");
                used.insert(fresh.clone());
                renamed.insert(c.name.clone(), fresh);
                keep.push(c.clone());
            }
            None => keep.push(c.clone()),
        }
    }
    for c in &mut keep {
        if let Some(n) = renamed.get(&c.name) {
            c.name = n.clone();
        }
        for f in &mut c.functions {
            rename_calls(&mut f.body, &renamed);
        }
    }
    let mut vein = g.vein.clone();
    rename_calls(&mut vein, &renamed);
    let mut delta = g.manifest_delta.clone();
    delta.components = delta
        .components
        .into_iter()
        .map(|(n, k)| (renamed.get(&n).cloned().unwrap_or(n), k))
        .collect();
    (renamed, keep, vein, delta)
}

pub(crate) fn rename_calls(block: &mut [Stmt], map: &BTreeMap<String, String>) {
    if map.is_empty() {
        return;
    }
    let fix = |t: &mut CallTarget| {
        if let Some(n) = map.get(&t.class) {
            t.class = n.clone();
        }
    };
    walk_block_mut(block, &mut |s| {
        if let Stmt::Call(t, _) = s {
            fix(t);
        }
        for e in s.exprs_mut() {
            e.walk_mut(&mut |x| {
                if let Expr::Call(t, _) = x {
                    fix(t);
                }
            });
        }
    });
}

fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Host class whose live functions, when one of them gains a branch, change
/// the variance of the program's per-function complexity the least on
/// average. Ties go to the earlier class.
fn choose_host_class(p: &Program, live: &BTreeSet<CallTarget>) -> Option<String> {
    let profile: Vec<(CallTarget, f64)> = p
        .functions()
        .map(|(c, f)| (CallTarget::new(&c.name, &f.name), cyclomatic_complexity(f) as f64))
        .collect();
    let ccs: Vec<f64> = profile.iter().map(|(_, v)| *v).collect();
    let base = variance(&ccs);
    let mut best: Option<(f64, String)> = None;
    for c in &p.classes {
        let idx: Vec<usize> = profile
            .iter()
            .enumerate()
            .filter(|(_, (t, _))| t.class == c.name && live.contains(t))
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let mut total = 0.0;
        for &i in &idx {
            let mut bumped = ccs.clone();
            bumped[i] += 1.0;
            total += (variance(&bumped) - base).abs();
        }
        let cost = total / idx.len() as f64;
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, c.name.clone()));
        }
    }
    best.map(|(_, n)| n)
}
