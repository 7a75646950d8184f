use std::fmt::Write;

use super::ast::*;

/// Canonical text form. `parse(&render(p)) == Ok(p)` for every program whose
/// identifiers are not reserved words.
pub fn render(p: &Program) -> String {
    let mut out = String::new();
    render_manifest(&p.manifest, &mut out);
    let _ = writeln!(out, "entry {}", p.entry);
    for c in &p.classes {
        out.push('\n');
        render_class(c, &mut out);
    }
    out
}

fn render_manifest(m: &Manifest, out: &mut String) {
    out.push_str("manifest {\n");
    for c in &m.capabilities {
        let _ = writeln!(out, "  capability {c}");
    }
    for (name, kind) in &m.components {
        let _ = writeln!(out, "  component {kind} {name}");
    }
    for i in &m.intents {
        let _ = writeln!(out, "  intent {i}");
    }
    for e in &m.endpoints {
        let _ = writeln!(out, "  endpoint {}", quote(e));
    }
    out.push_str("}\n");
}

pub fn render_class(c: &Class, out: &mut String) {
    let _ = writeln!(out, "class {} {{", c.name);
    for f in &c.functions {
        let _ = writeln!(out, "  fn {}({}) {{", f.name, f.params.join(", "));
        render_block(&f.body, 2, out);
        out.push_str("  }\n");
    }
    out.push_str("}\n");
}

pub fn render_block(block: &[Stmt], depth: usize, out: &mut String) {
    for s in block {
        render_stmt(s, depth, out);
    }
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

pub fn render_stmt(s: &Stmt, depth: usize, out: &mut String) {
    indent(depth, out);
    match s {
        Stmt::Assign(v, e) => {
            let _ = writeln!(out, "let {v} = {};", expr_str(e));
        }
        Stmt::Call(t, args) => {
            let _ = writeln!(out, "call {t}({});", args_str(args));
        }
        Stmt::Api(name, args) => {
            let _ = writeln!(out, "api {name}({});", args_str(args));
        }
        Stmt::Emit(e) => {
            let _ = writeln!(out, "emit {};", expr_str(e));
        }
        Stmt::Return(e) => {
            let _ = writeln!(out, "return {};", expr_str(e));
        }
        Stmt::If(c, then, otherwise) => {
            let _ = writeln!(out, "if {} {{", expr_str(c));
            render_block(then, depth + 1, out);
            indent(depth, out);
            if otherwise.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                render_block(otherwise, depth + 1, out);
                indent(depth, out);
                out.push_str("}\n");
            }
        }
        Stmt::While(c, body) => {
            let _ = writeln!(out, "while {} {{", expr_str(c));
            render_block(body, depth + 1, out);
            indent(depth, out);
            out.push_str("}\n");
        }
    }
}

fn args_str(args: &[Expr]) -> String {
    args.iter().map(expr_str).collect::<Vec<_>>().join(", ")
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

pub fn expr_str(e: &Expr) -> String {
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Str(s) => quote(s),
        Expr::Var(v) => v.clone(),
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            let wrapped = match (op, inner.as_ref()) {
                (_, Expr::Binary(..)) => format!("({})", expr_str(inner)),
                // `-5` would read back as a negative literal.
                (UnOp::Neg, Expr::Int(v)) if *v >= 0 => format!("({v})"),
                _ => expr_str(inner),
            };
            format!("{sym}{wrapped}")
        }
        Expr::Binary(op, lhs, rhs) => {
            let prec = op.precedence();
            let l = match lhs.as_ref() {
                Expr::Binary(o, ..) if o.precedence() < prec => format!("({})", expr_str(lhs)),
                _ => expr_str(lhs),
            };
            let r = match rhs.as_ref() {
                Expr::Binary(o, ..) if o.precedence() <= prec => format!("({})", expr_str(rhs)),
                _ => expr_str(rhs),
            };
            format!("{l} {} {r}", op.symbol())
        }
        Expr::Index(base, idx) => {
            let b = match base.as_ref() {
                Expr::Binary(..) | Expr::Unary(..) => format!("({})", expr_str(base)),
                _ => expr_str(base),
            };
            format!("{b}[{}]", expr_str(idx))
        }
        Expr::NewBools(n) => format!("new_bools({})", expr_str(n)),
        Expr::Len(a) => format!("len({})", expr_str(a)),
        Expr::Random(r) => match r {
            RandomExpr::Bool => "rand_bool()".into(),
            RandomExpr::Int(n) => format!("rand_int({})", expr_str(n)),
            RandomExpr::Bools(n) => format!("rand_bools({})", expr_str(n)),
        },
        Expr::Call(t, args) => format!("{t}({})", args_str(args)),
    }
}
