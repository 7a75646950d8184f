//! Deterministic tree-walking interpreter.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::registry;

pub const DEFAULT_FUEL: u64 = 1_000_000;
const MAX_CALL_DEPTH: usize = 128;
/// Seed perturbation for the generator behind `rand_bools`.
const FRESH_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Value {
    Unit,
    Int(i64),
    Bool(bool),
    Str(String),
    Bools(Vec<bool>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("()"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Bools(bs) => {
                f.write_str("[")?;
                for b in bs {
                    f.write_str(if *b { "1" } else { "0" })?;
                }
                f.write_str("]")
            }
        }
    }
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Unit => "unit",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Bools(_) => "bool array",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub outputs: Vec<Value>,
    /// (api name, rendered arguments) in call order.
    pub api_calls: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("fuel exhausted after {0} statements")]
    FuelExhausted(u64),
    #[error("type error: {0}")]
    Type(String),
    #[error("undefined variable '{0}'")]
    UndefinedVariable(String),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("'{0}' expects {1} arguments, got {2}")]
    Arity(String, usize, usize),
    #[error("division by zero")]
    DivisionByZero,
    #[error("index {0} out of bounds for length {1}")]
    IndexOutOfBounds(i64, usize),
    #[error("invalid array length {0}")]
    InvalidLength(i64),
    #[error("api '{0}' requires undeclared capability {1}")]
    PermissionDenied(String, String),
    #[error("call depth limit exceeded")]
    StackOverflow,
}

impl RuntimeError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, RuntimeError::FuelExhausted(_))
    }
}

/// One test case for semantic comparison: program input plus runtime seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestInput {
    pub input: i64,
    pub seed: u64,
}

struct Machine<'p> {
    program: &'p Program,
    fuel_limit: u64,
    used: u64,
    depth: usize,
    ambient: ChaCha8Rng,
    fresh: ChaCha8Rng,
    trace: Trace,
}

enum Flow {
    Next,
    Return(Value),
}

/// Run the entry function on `input`. The trace is a pure function of
/// (program, input, seed); exceeding `fuel` executed statements is an error.
pub fn interpret(p: &Program, input: i64, seed: u64, fuel: u64) -> Result<Trace, RuntimeError> {
    let mut m = Machine {
        program: p,
        fuel_limit: fuel,
        used: 0,
        depth: 0,
        ambient: ChaCha8Rng::seed_from_u64(seed),
        fresh: ChaCha8Rng::seed_from_u64(seed ^ FRESH_STREAM_SALT),
        trace: Trace::default(),
    };
    m.call(&p.entry, vec![Value::Int(input)])?;
    Ok(m.trace)
}

pub fn interpret_case(p: &Program, case: TestInput, fuel: u64) -> Result<Trace, RuntimeError> {
    interpret(p, case.input, case.seed, fuel)
}

impl<'p> Machine<'p> {
    fn call(&mut self, target: &CallTarget, args: Vec<Value>) -> Result<Value, RuntimeError> {
        let f = self
            .program
            .function(target)
            .ok_or_else(|| RuntimeError::UnknownFunction(target.to_string()))?;
        if f.params.len() != args.len() {
            return Err(RuntimeError::Arity(target.to_string(), f.params.len(), args.len()));
        }
        if self.depth >= MAX_CALL_DEPTH {
            return Err(RuntimeError::StackOverflow);
        }
        self.depth += 1;
        let mut env: HashMap<&'p str, Value> = HashMap::with_capacity(8);
        for (p, a) in f.params.iter().zip(args) {
            env.insert(p.as_str(), a);
        }
        let flow = self.block(&f.body, &mut env);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(Value::Unit),
        }
    }

    fn tick(&mut self) -> Result<(), RuntimeError> {
        self.used += 1;
        if self.used > self.fuel_limit {
            return Err(RuntimeError::FuelExhausted(self.fuel_limit));
        }
        Ok(())
    }

    fn block(
        &mut self,
        block: &'p [Stmt],
        env: &mut HashMap<&'p str, Value>,
    ) -> Result<Flow, RuntimeError> {
        for s in block {
            if let Flow::Return(v) = self.stmt(s, env)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &'p Stmt, env: &mut HashMap<&'p str, Value>) -> Result<Flow, RuntimeError> {
        self.tick()?;
        match s {
            Stmt::Assign(v, e) => {
                let val = self.eval(e, env)?;
                env.insert(v.as_str(), val);
            }
            Stmt::Call(t, args) => {
                let vals = self.eval_all(args, env)?;
                self.call(t, vals)?;
            }
            Stmt::Api(name, args) => {
                if let Some(cap) = registry::required_capability(name) {
                    if !self.program.manifest.capabilities.contains(cap) {
                        return Err(RuntimeError::PermissionDenied(name.clone(), cap.to_string()));
                    }
                }
                let vals = self.eval_all(args, env)?;
                let summary = vals.iter().map(Value::to_string).collect::<Vec<_>>().join(",");
                self.trace.api_calls.push((name.clone(), summary));
            }
            Stmt::Emit(e) => {
                let v = self.eval(e, env)?;
                self.trace.outputs.push(v);
            }
            Stmt::Return(e) => return Ok(Flow::Return(self.eval(e, env)?)),
            Stmt::If(c, then, otherwise) => {
                let branch = if self.eval_bool(c, env)? { then } else { otherwise };
                return self.block(branch, env);
            }
            Stmt::While(c, body) => {
                while self.eval_bool(c, env)? {
                    if let Flow::Return(v) = self.block(body, env)? {
                        return Ok(Flow::Return(v));
                    }
                    self.tick()?;
                }
            }
        }
        Ok(Flow::Next)
    }

    fn eval_all(
        &mut self,
        args: &'p [Expr],
        env: &mut HashMap<&'p str, Value>,
    ) -> Result<Vec<Value>, RuntimeError> {
        args.iter().map(|a| self.eval(a, env)).collect()
    }

    fn eval_bool(&mut self, e: &'p Expr, env: &mut HashMap<&'p str, Value>) -> Result<bool, RuntimeError> {
        match self.eval(e, env)? {
            Value::Bool(b) => Ok(b),
            other => Err(RuntimeError::Type(format!("expected bool, found {}", other.type_name()))),
        }
    }

    fn eval_int(&mut self, e: &'p Expr, env: &mut HashMap<&'p str, Value>) -> Result<i64, RuntimeError> {
        match self.eval(e, env)? {
            Value::Int(v) => Ok(v),
            other => Err(RuntimeError::Type(format!("expected int, found {}", other.type_name()))),
        }
    }

    fn length(n: i64) -> Result<usize, RuntimeError> {
        if (0..=1 << 20).contains(&n) {
            Ok(n as usize)
        } else {
            Err(RuntimeError::InvalidLength(n))
        }
    }

    fn eval(&mut self, e: &'p Expr, env: &mut HashMap<&'p str, Value>) -> Result<Value, RuntimeError> {
        Ok(match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Var(v) => env
                .get(v.as_str())
                .cloned()
                .ok_or_else(|| RuntimeError::UndefinedVariable(v.clone()))?,
            Expr::Unary(op, inner) => match (op, self.eval(inner, env)?) {
                (UnOp::Not, Value::Bool(b)) => Value::Bool(!b),
                (UnOp::Neg, Value::Int(v)) => Value::Int(v.wrapping_neg()),
                (_, other) => {
                    return Err(RuntimeError::Type(format!(
                        "bad operand {} for unary operator",
                        other.type_name()
                    )))
                }
            },
            Expr::Binary(op, lhs, rhs) => return self.binary(*op, lhs, rhs, env),
            Expr::Index(base, idx) => {
                // Index into a variable without cloning the array.
                let i = self.eval_int(idx, env)?;
                let pick = |bs: &Vec<bool>| -> Result<Value, RuntimeError> {
                    usize::try_from(i)
                        .ok()
                        .and_then(|u| bs.get(u))
                        .map(|b| Value::Bool(*b))
                        .ok_or(RuntimeError::IndexOutOfBounds(i, bs.len()))
                };
                if let Expr::Var(v) = base.as_ref() {
                    match env.get(v.as_str()) {
                        Some(Value::Bools(bs)) => return pick(bs),
                        Some(other) => {
                            return Err(RuntimeError::Type(format!(
                                "cannot index {}",
                                other.type_name()
                            )))
                        }
                        None => return Err(RuntimeError::UndefinedVariable(v.clone())),
                    }
                }
                match self.eval(base, env)? {
                    Value::Bools(bs) => pick(&bs)?,
                    other => {
                        return Err(RuntimeError::Type(format!("cannot index {}", other.type_name())))
                    }
                }
            }
            Expr::NewBools(n) => {
                let n = Self::length(self.eval_int(n, env)?)?;
                Value::Bools(vec![false; n])
            }
            Expr::Len(a) => match self.eval(a, env)? {
                Value::Bools(bs) => Value::Int(bs.len() as i64),
                Value::Str(s) => Value::Int(s.chars().count() as i64),
                other => return Err(RuntimeError::Type(format!("no length for {}", other.type_name()))),
            },
            Expr::Random(r) => match r {
                RandomExpr::Bool => Value::Bool(self.ambient.gen()),
                RandomExpr::Int(bound) => {
                    let b = self.eval_int(bound, env)?;
                    if b <= 0 {
                        return Err(RuntimeError::InvalidLength(b));
                    }
                    Value::Int(self.ambient.gen_range(0..b))
                }
                RandomExpr::Bools(n) => {
                    let n = Self::length(self.eval_int(n, env)?)?;
                    Value::Bools((0..n).map(|_| self.fresh.gen()).collect())
                }
            },
            Expr::Call(t, args) => {
                let vals = self.eval_all(args, env)?;
                self.call(t, vals)?
            }
        })
    }

    fn binary(
        &mut self,
        op: BinOp,
        lhs: &'p Expr,
        rhs: &'p Expr,
        env: &mut HashMap<&'p str, Value>,
    ) -> Result<Value, RuntimeError> {
        // Short-circuit logic.
        if matches!(op, BinOp::And | BinOp::Or) {
            let l = self.eval_bool(lhs, env)?;
            if (op == BinOp::And && !l) || (op == BinOp::Or && l) {
                return Ok(Value::Bool(l));
            }
            return Ok(Value::Bool(self.eval_bool(rhs, env)?));
        }
        let l = self.eval(lhs, env)?;
        let r = self.eval(rhs, env)?;
        apply_binary(op, &l, &r)
    }
}

/// Non-short-circuit binary operator semantics, shared with constant folding.
pub fn apply_binary(op: BinOp, l: &Value, r: &Value) -> Result<Value, RuntimeError> {
    use Value::*;
    Ok(match (op, l, r) {
        (BinOp::Add, Int(a), Int(b)) => Int(a.wrapping_add(*b)),
        (BinOp::Add, Str(a), Str(b)) => Str(format!("{a}{b}")),
        (BinOp::Sub, Int(a), Int(b)) => Int(a.wrapping_sub(*b)),
        (BinOp::Mul, Int(a), Int(b)) => Int(a.wrapping_mul(*b)),
        (BinOp::Div, Int(_), Int(0)) | (BinOp::Rem, Int(_), Int(0)) => {
            return Err(RuntimeError::DivisionByZero)
        }
        (BinOp::Div, Int(a), Int(b)) => Int(a.wrapping_div(*b)),
        (BinOp::Rem, Int(a), Int(b)) => Int(a.wrapping_rem(*b)),
        (BinOp::Eq, a, b) if a.type_name() == b.type_name() => Bool(a == b),
        (BinOp::Ne, a, b) if a.type_name() == b.type_name() => Bool(a != b),
        (BinOp::Lt, Int(a), Int(b)) => Bool(a < b),
        (BinOp::Le, Int(a), Int(b)) => Bool(a <= b),
        (BinOp::Gt, Int(a), Int(b)) => Bool(a > b),
        (BinOp::Ge, Int(a), Int(b)) => Bool(a >= b),
        (BinOp::And, Bool(a), Bool(b)) => Bool(*a && *b),
        (BinOp::Or, Bool(a), Bool(b)) => Bool(*a || *b),
        (op, a, b) => {
            return Err(RuntimeError::Type(format!(
                "operator {} not defined for {} and {}",
                op.symbol(),
                a.type_name(),
                b.type_name()
            )))
        }
    })
}
