//! Redundant-code elimination used as the preprocessing operator that
//! adversarial programs must survive.
//!
//! Runs to a fixpoint:
//! - constant folding of operators whose operands are literals,
//! - removal of branches with literal conditions and of code after `return`,
//! - removal of unused variables bound to side-effect-free expressions,
//! - removal of functions and classes unreachable from the entry function,
//!   together with manifest components whose class disappeared,
//! - removal of capabilities no remaining api needs and endpoints no
//!   remaining string literal references.
//!
//! Runtime random sources are never evaluated.

use std::collections::BTreeSet;

use super::ast::*;
use super::graph::DependencyGraph;
use super::interp::{apply_binary, Value};
use super::registry;

pub fn eliminate_dead_code(p: &Program) -> Program {
    let mut cur = p.clone();
    loop {
        let next = pass(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn pass(p: &Program) -> Program {
    let mut out = p.clone();
    for c in &mut out.classes {
        for f in &mut c.functions {
            fold_block(&mut f.body);
            simplify_block(&mut f.body);
            remove_unused_vars(f);
        }
    }
    remove_unreachable(&mut out);
    strip_manifest(&mut out);
    out
}

fn literal(e: &Expr) -> Option<Value> {
    match e {
        Expr::Int(v) => Some(Value::Int(*v)),
        Expr::Bool(b) => Some(Value::Bool(*b)),
        Expr::Str(s) => Some(Value::Str(s.clone())),
        _ => None,
    }
}

fn to_expr(v: Value) -> Option<Expr> {
    match v {
        Value::Int(i) => Some(Expr::Int(i)),
        Value::Bool(b) => Some(Expr::Bool(b)),
        Value::Str(s) => Some(Expr::Str(s)),
        _ => None,
    }
}

/// Bottom-up folding; ill-typed or failing operations are left in place so
/// they still fail at runtime.
fn fold_expr(e: &mut Expr) {
    match e {
        Expr::Unary(_, inner) | Expr::NewBools(inner) | Expr::Len(inner) => fold_expr(inner),
        Expr::Binary(_, a, b) | Expr::Index(a, b) => {
            fold_expr(a);
            fold_expr(b);
        }
        Expr::Random(RandomExpr::Int(inner) | RandomExpr::Bools(inner)) => fold_expr(inner),
        Expr::Call(_, args) => args.iter_mut().for_each(fold_expr),
        _ => {}
    }
    let folded = match e {
        Expr::Unary(op, inner) => match (op, literal(inner)) {
            (UnOp::Not, Some(Value::Bool(b))) => Some(Expr::Bool(!b)),
            (UnOp::Neg, Some(Value::Int(v))) => Some(Expr::Int(v.wrapping_neg())),
            _ => None,
        },
        Expr::Binary(op, a, b) => match (literal(a), literal(b)) {
            (Some(x), Some(y)) => apply_binary(*op, &x, &y).ok().and_then(to_expr),
            _ => None,
        },
        _ => None,
    };
    if let Some(f) = folded {
        *e = f;
    }
}

fn fold_block(block: &mut [Stmt]) {
    walk_block_mut(block, &mut |s| {
        for e in s.exprs_mut() {
            fold_expr(e);
        }
    });
}

fn simplify_block(block: &mut Vec<Stmt>) {
    let mut out = Vec::with_capacity(block.len());
    for mut s in block.drain(..) {
        for b in s.blocks_mut() {
            simplify_block(b);
        }
        match s {
            Stmt::If(Expr::Bool(true), then, _) => out.extend(then),
            Stmt::If(Expr::Bool(false), _, otherwise) => out.extend(otherwise),
            Stmt::While(Expr::Bool(false), _) => {}
            other => out.push(other),
        }
    }
    // Nothing after a top-level return of this block can run.
    if let Some(i) = out.iter().position(|s| matches!(s, Stmt::Return(_))) {
        out.truncate(i + 1);
    }
    *block = out;
}

fn remove_unused_vars(f: &mut Function) {
    let mut read: BTreeSet<String> = BTreeSet::new();
    walk_block(&f.body, &mut |s| {
        read.extend(s.uses().into_iter().map(str::to_string));
    });
    fn strip(block: &mut Vec<Stmt>, read: &BTreeSet<String>) {
        block.retain(|s| match s {
            Stmt::Assign(v, e) => read.contains(v) || !e.is_pure_total(),
            _ => true,
        });
        for s in block.iter_mut() {
            for b in s.blocks_mut() {
                strip(b, read);
            }
        }
    }
    strip(&mut f.body, &read);
}

fn remove_unreachable(p: &mut Program) {
    let graph = DependencyGraph::build(p);
    let live = graph.reachable_functions(&[p.entry.clone()]);
    for c in &mut p.classes {
        let name = c.name.clone();
        c.functions.retain(|f| live.contains(&CallTarget::new(&name, &f.name)));
    }
    p.classes.retain(|c| !c.functions.is_empty());
    let classes: BTreeSet<String> = p.classes.iter().map(|c| c.name.clone()).collect();
    p.manifest.components.retain(|name, _| classes.contains(name));
}

fn strip_manifest(p: &mut Program) {
    let needed: BTreeSet<&'static str> =
        p.api_names().iter().filter_map(|a| registry::required_capability(a)).collect();
    p.manifest.capabilities.retain(|c| needed.contains(c.as_str()));
    let literals = p.string_literals();
    p.manifest.endpoints.retain(|e| literals.contains(e));
}
