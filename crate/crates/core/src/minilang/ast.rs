use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComponentKind {
    Activity,
    Service,
    Receiver,
    Provider,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 4] = [
        ComponentKind::Activity,
        ComponentKind::Service,
        ComponentKind::Receiver,
        ComponentKind::Provider,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ComponentKind::Activity => "activity",
            ComponentKind::Service => "service",
            ComponentKind::Receiver => "receiver",
            ComponentKind::Provider => "provider",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.keyword() == word)
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Declarations that live outside code: capabilities, components, intents
/// and network endpoints.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub capabilities: BTreeSet<String>,
    /// Component name to kind. Every name must be a declared class.
    pub components: BTreeMap<String, ComponentKind>,
    pub intents: BTreeSet<String>,
    pub endpoints: BTreeSet<String>,
}

impl Manifest {
    pub fn is_empty(&self) -> bool {
        self.capabilities.is_empty()
            && self.components.is_empty()
            && self.intents.is_empty()
            && self.endpoints.is_empty()
    }

    /// Union `other` into `self`. Components already present keep their kind.
    pub fn merge(&mut self, other: &Manifest) {
        self.capabilities.extend(other.capabilities.iter().cloned());
        for (name, kind) in &other.components {
            self.components.entry(name.clone()).or_insert(*kind);
        }
        self.intents.extend(other.intents.iter().cloned());
        self.endpoints.extend(other.endpoints.iter().cloned());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

/// Sources of runtime randomness. Never evaluated statically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RandomExpr {
    /// Uniform boolean from the ambient seeded stream.
    Bool,
    /// Uniform integer in `[0, bound)` from the ambient seeded stream.
    Int(Box<Expr>),
    /// Array of uniform booleans drawn from a freshly constructed generator,
    /// independent of the ambient stream.
    Bools(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Str(String),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    /// All-false boolean array of the given length.
    NewBools(Box<Expr>),
    Len(Box<Expr>),
    Random(RandomExpr),
    Call(CallTarget, Vec<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn index(array: Expr, idx: Expr) -> Expr {
        Expr::Index(Box::new(array), Box::new(idx))
    }

    /// Pre-order walk over this expression and all subexpressions.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => {}
            Expr::Unary(_, e) | Expr::NewBools(e) | Expr::Len(e) => e.walk(visit),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Expr::Random(r) => match r {
                RandomExpr::Bool => {}
                RandomExpr::Int(e) | RandomExpr::Bools(e) => e.walk(visit),
            },
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(visit)),
        }
    }

    pub fn walk_mut(&mut self, visit: &mut impl FnMut(&mut Expr)) {
        visit(self);
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => {}
            Expr::Unary(_, e) | Expr::NewBools(e) | Expr::Len(e) => e.walk_mut(visit),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => {
                a.walk_mut(visit);
                b.walk_mut(visit);
            }
            Expr::Random(r) => match r {
                RandomExpr::Bool => {}
                RandomExpr::Int(e) | RandomExpr::Bools(e) => e.walk_mut(visit),
            },
            Expr::Call(_, args) => args.iter_mut().for_each(|a| a.walk_mut(visit)),
        }
    }

    /// Variables read by this expression, in first-occurrence order.
    pub fn vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
        });
        out
    }

    /// True when evaluation can neither fail, consume randomness, nor call code.
    pub fn is_pure_total(&self) -> bool {
        let mut ok = true;
        self.walk(&mut |e| match e {
            Expr::Random(_) | Expr::Call(..) | Expr::Index(..) => ok = false,
            Expr::Binary(BinOp::Div | BinOp::Rem, ..) => ok = false,
            // Array allocation with a dynamic size may fail on negative lengths.
            Expr::NewBools(_) | Expr::Len(_) => ok = false,
            _ => {}
        });
        ok
    }

    pub fn has_random(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if matches!(e, Expr::Random(_)) {
                found = true;
            }
        });
        found
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallTarget {
    pub class: String,
    pub function: String,
}

impl CallTarget {
    pub fn new(class: impl Into<String>, function: impl Into<String>) -> Self {
        Self { class: class.into(), function: function.into() }
    }
}

impl fmt::Display for CallTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.class, self.function)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stmt {
    /// Binds or rebinds a function-local variable.
    Assign(String, Expr),
    Call(CallTarget, Vec<Expr>),
    Api(String, Vec<Expr>),
    Emit(Expr),
    If(Expr, Vec<Stmt>, Vec<Stmt>),
    While(Expr, Vec<Stmt>),
    Return(Expr),
}

impl Stmt {
    /// Expressions evaluated directly by this statement (not nested blocks).
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Stmt::Assign(_, e) | Stmt::Emit(e) | Stmt::Return(e) => vec![e],
            Stmt::Call(_, args) | Stmt::Api(_, args) => args.iter().collect(),
            Stmt::If(c, ..) | Stmt::While(c, _) => vec![c],
        }
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Stmt::Assign(_, e) | Stmt::Emit(e) | Stmt::Return(e) => vec![e],
            Stmt::Call(_, args) | Stmt::Api(_, args) => args.iter_mut().collect(),
            Stmt::If(c, ..) | Stmt::While(c, _) => vec![c],
        }
    }

    /// Variables read directly by this statement (not by nested blocks).
    pub fn uses(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in self.exprs() {
            for v in e.vars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn defines(&self) -> Option<&str> {
        match self {
            Stmt::Assign(v, _) => Some(v),
            _ => None,
        }
    }

    /// Call targets in this statement, including calls inside its expressions
    /// but not inside nested blocks.
    pub fn direct_calls(&self) -> Vec<&CallTarget> {
        let mut out = Vec::new();
        if let Stmt::Call(t, _) = self {
            out.push(t);
        }
        for e in self.exprs() {
            e.walk(&mut |x| {
                if let Expr::Call(t, _) = x {
                    out.push(t);
                }
            });
        }
        out
    }

    /// String literals appearing directly in this statement.
    pub fn string_literals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for e in self.exprs() {
            e.walk(&mut |x| {
                if let Expr::Str(s) = x {
                    out.push(s.as_str());
                }
            });
        }
        out
    }

    pub fn blocks(&self) -> Vec<&Vec<Stmt>> {
        match self {
            Stmt::If(_, t, e) => vec![t, e],
            Stmt::While(_, b) => vec![b],
            _ => Vec::new(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match self {
            Stmt::If(_, t, e) => vec![t, e],
            Stmt::While(_, b) => vec![b],
            _ => Vec::new(),
        }
    }
}

/// Pre-order walk over a block, descending into nested blocks.
pub fn walk_block<'a>(block: &'a [Stmt], visit: &mut impl FnMut(&'a Stmt)) {
    for s in block {
        visit(s);
        for b in s.blocks() {
            walk_block(b, visit);
        }
    }
}

pub fn walk_block_mut(block: &mut [Stmt], visit: &mut impl FnMut(&mut Stmt)) {
    for s in block.iter_mut() {
        visit(s);
        for b in s.blocks_mut() {
            walk_block_mut(b, visit);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

impl Function {
    pub fn new(name: impl Into<String>, params: Vec<String>, body: Vec<Stmt>) -> Self {
        Self { name: name.into(), params, body }
    }

    pub fn statement_count(&self) -> usize {
        let mut n = 0;
        walk_block(&self.body, &mut |_| n += 1);
        n
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Class {
    pub name: String,
    pub functions: Vec<Function>,
}

impl Class {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut Function> {
        self.functions.iter_mut().find(|f| f.name == name)
    }
}

/// A complete program: manifest, classes in declaration order, and the
/// designated entry function that receives the program input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub manifest: Manifest,
    pub entry: CallTarget,
    pub classes: Vec<Class>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&Class> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_mut(&mut self, name: &str) -> Option<&mut Class> {
        self.classes.iter_mut().find(|c| c.name == name)
    }

    pub fn function(&self, target: &CallTarget) -> Option<&Function> {
        self.class(&target.class)?.function(&target.function)
    }

    pub fn entry_function(&self) -> Option<&Function> {
        self.function(&self.entry)
    }

    pub fn statement_count(&self) -> usize {
        self.functions().map(|(_, f)| f.statement_count()).sum()
    }

    pub fn functions(&self) -> impl Iterator<Item = (&Class, &Function)> {
        self.classes
            .iter()
            .flat_map(|c| c.functions.iter().map(move |f| (c, f)))
    }

    /// Api names used anywhere in the code.
    pub fn api_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (_, f) in self.functions() {
            walk_block(&f.body, &mut |s| {
                if let Stmt::Api(name, _) = s {
                    out.insert(name.clone());
                }
            });
        }
        out
    }

    pub fn string_literals(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (_, f) in self.functions() {
            walk_block(&f.body, &mut |s| {
                out.extend(s.string_literals().into_iter().map(str::to_string));
            });
        }
        out
    }
}
