//! Recursive-descent parser for the minilang text format.
//!
//! ```text
//! program   := manifest entry class*
//! manifest  := "manifest" "{" mline* "}"
//! mline     := "capability" NAME | "component" KIND IDENT
//!            | "intent" NAME | "endpoint" STRING
//! entry     := "entry" IDENT "." IDENT
//! class     := "class" IDENT "{" function* "}"
//! function  := "fn" IDENT "(" params ")" block
//! block     := "{" stmt* "}"
//! stmt      := "let" IDENT "=" expr ";"
//!            | "call" IDENT "." IDENT "(" args ")" ";"
//!            | "api" NAME "(" args ")" ";"
//!            | "emit" expr ";"
//!            | "return" expr ";"
//!            | "if" expr block ("else" block)?
//!            | "while" expr block
//! ```
//!
//! `NAME` is a dot-separated identifier path. Lines starting with `#` are
//! comments.

use std::collections::BTreeSet;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 24] = [
    "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "!", "=", "(", ")",
    "{", "}", "[", "]", ",", ";", ".",
];

pub const KEYWORDS: [&str; 21] = [
    "manifest", "capability", "component", "intent", "endpoint", "entry", "class", "fn", "let",
    "call", "api", "emit", "return", "if", "else", "while", "true", "false", "rand_bool",
    "rand_int", "rand_bools",
];

const BUILTINS: [&str; 2] = ["new_bools", "len"];

pub fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word) || BUILTINS.contains(&word)
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        if line.trim_start().starts_with('#') {
            continue;
        }
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push(Token { tok: Tok::Ident(word), line: line_no, col });
            } else if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let value = digits.parse::<u64>().map_err(|_| ParseError {
                    line: line_no,
                    col,
                    message: format!("integer literal out of range: {digits}"),
                })?;
                out.push(Token { tok: Tok::Int(value), line: line_no, col });
            } else if c == '"' {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(ParseError {
                                line: line_no,
                                col,
                                message: "unterminated string literal".into(),
                            })
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let esc = chars.get(i + 1).copied();
                            match esc {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                _ => {
                                    return Err(ParseError {
                                        line: line_no,
                                        col: i + 1,
                                        message: "invalid escape sequence".into(),
                                    })
                                }
                            }
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(s), line: line_no, col });
            } else {
                let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let sym = SYMBOLS
                    .iter()
                    .find(|s| rest.starts_with(**s))
                    .ok_or_else(|| ParseError {
                        line: line_no,
                        col,
                        message: format!("unexpected character '{c}'"),
                    })?;
                i += sym.len();
                out.push(Token { tok: Tok::Sym(sym), line: line_no, col });
            }
        }
    }
    let (line, col) = out.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.toks[self.pos];
        Err(ParseError { line: t.line, col: t.col, message: message.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected '{s}', found {}", describe(self.peek())))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected '{w}', found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(w) if !is_reserved(&w) => {
                self.bump();
                Ok(w)
            }
            other => self.error(format!("expected identifier, found {}", describe(&other))),
        }
    }

    /// Dot-separated path such as `net.open` or `action.MAIN`.
    fn dotted_name(&mut self) -> Result<String, ParseError> {
        let mut name = match self.peek().clone() {
            Tok::Ident(w) => {
                self.bump();
                w
            }
            other => return self.error(format!("expected name, found {}", describe(&other))),
        };
        while self.is_sym(".") {
            self.bump();
            match self.peek().clone() {
                Tok::Ident(w) => {
                    self.bump();
                    name.push('.');
                    name.push_str(&w);
                }
                other => {
                    return self.error(format!("expected name segment, found {}", describe(&other)))
                }
            }
        }
        Ok(name)
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let manifest = self.manifest()?;
        self.expect_word("entry")?;
        let class = self.ident()?;
        self.expect_sym(".")?;
        let function = self.ident()?;
        let entry = CallTarget { class, function };
        let mut classes: Vec<Class> = Vec::new();
        let mut seen = BTreeSet::new();
        while !matches!(self.peek(), Tok::Eof) {
            let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
            let class = self.class()?;
            if !seen.insert(class.name.clone()) {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("duplicate class '{}'", class.name),
                });
            }
            classes.push(class);
        }
        Ok(Program { manifest, entry, classes })
    }

    fn manifest(&mut self) -> Result<Manifest, ParseError> {
        self.expect_word("manifest")?;
        self.expect_sym("{")?;
        let mut m = Manifest::default();
        while !self.is_sym("}") {
            match self.peek().clone() {
                Tok::Ident(w) if w == "capability" => {
                    self.bump();
                    let n = self.dotted_name()?;
                    m.capabilities.insert(n);
                }
                Tok::Ident(w) if w == "intent" => {
                    self.bump();
                    let n = self.dotted_name()?;
                    m.intents.insert(n);
                }
                Tok::Ident(w) if w == "endpoint" => {
                    self.bump();
                    match self.bump() {
                        Tok::Str(s) => {
                            m.endpoints.insert(s);
                        }
                        _ => return self.error("expected endpoint string"),
                    }
                }
                Tok::Ident(w) if w == "component" => {
                    self.bump();
                    let kind_word = self.dotted_name()?;
                    let Some(kind) = ComponentKind::from_keyword(&kind_word) else {
                        return self.error(format!("unknown component kind '{kind_word}'"));
                    };
                    let name = self.ident()?;
                    if m.components.insert(name.clone(), kind).is_some() {
                        return self.error(format!("duplicate component '{name}'"));
                    }
                }
                other => {
                    return self.error(format!("unexpected {} in manifest", describe(&other)))
                }
            }
        }
        self.expect_sym("}")?;
        Ok(m)
    }

    fn class(&mut self) -> Result<Class, ParseError> {
        self.expect_word("class")?;
        let name = self.ident()?;
        self.expect_sym("{")?;
        let mut functions: Vec<Function> = Vec::new();
        while !self.is_sym("}") {
            let f = self.function()?;
            if functions.iter().any(|g| g.name == f.name) {
                return self.error(format!("duplicate function '{}.{}'", name, f.name));
            }
            functions.push(f);
        }
        self.expect_sym("}")?;
        Ok(Class { name, functions })
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        self.expect_word("fn")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                params.push(self.ident()?);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let body = self.block()?;
        Ok(Function { name, params, body })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if matches!(self.peek(), Tok::Eof) {
                return self.error("unexpected end of input in block");
            }
            out.push(self.stmt()?);
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_sym("(")?;
        let mut args = Vec::new();
        if !self.is_sym(")") {
            loop {
                args.push(self.expr(0)?);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(args)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let word = match self.peek() {
            Tok::Ident(w) => w.clone(),
            other => return self.error(format!("expected statement, found {}", describe(other))),
        };
        let stmt = match word.as_str() {
            "let" => {
                self.bump();
                let v = self.ident()?;
                self.expect_sym("=")?;
                let e = self.expr(0)?;
                self.expect_sym(";")?;
                Stmt::Assign(v, e)
            }
            "call" => {
                self.bump();
                let class = self.ident()?;
                self.expect_sym(".")?;
                let function = self.ident()?;
                let args = self.args()?;
                self.expect_sym(";")?;
                Stmt::Call(CallTarget { class, function }, args)
            }
            "api" => {
                self.bump();
                let name = self.dotted_name()?;
                let args = self.args()?;
                self.expect_sym(";")?;
                Stmt::Api(name, args)
            }
            "emit" => {
                self.bump();
                let e = self.expr(0)?;
                self.expect_sym(";")?;
                Stmt::Emit(e)
            }
            "return" => {
                self.bump();
                let e = self.expr(0)?;
                self.expect_sym(";")?;
                Stmt::Return(e)
            }
            "if" => {
                self.bump();
                let c = self.expr(0)?;
                let then = self.block()?;
                let otherwise = if self.is_word("else") {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                Stmt::If(c, then, otherwise)
            }
            "while" => {
                self.bump();
                let c = self.expr(0)?;
                let body = self.block()?;
                Stmt::While(c, body)
            }
            other => return self.error(format!("unknown statement '{other}'")),
        };
        Ok(stmt)
    }

    fn binop(&self) -> Option<BinOp> {
        let Tok::Sym(s) = self.peek() else { return None };
        Some(match *s {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn expr(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() <= min_prec {
                break;
            }
            self.bump();
            let rhs = self.expr(op.precedence())?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_sym("!") {
            self.bump();
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.is_sym("-") {
            self.bump();
            if let Tok::Int(v) = *self.peek() {
                self.bump();
                let n = if v == i64::MIN.unsigned_abs() {
                    i64::MIN
                } else if v <= i64::MAX as u64 {
                    -(v as i64)
                } else {
                    return self.error("integer literal out of range");
                };
                return self.postfix(Expr::Int(n));
            }
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        let p = self.primary()?;
        self.postfix(p)
    }

    fn postfix(&mut self, mut e: Expr) -> Result<Expr, ParseError> {
        while self.is_sym("[") {
            self.bump();
            let idx = self.expr(0)?;
            self.expect_sym("]")?;
            e = Expr::Index(Box::new(e), Box::new(idx));
        }
        Ok(e)
    }

    fn single_arg(&mut self) -> Result<Box<Expr>, ParseError> {
        self.expect_sym("(")?;
        let e = self.expr(0)?;
        self.expect_sym(")")?;
        Ok(Box::new(e))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                if v > i64::MAX as u64 {
                    return self.error("integer literal out of range");
                }
                Ok(Expr::Int(v as i64))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr(0)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(w) => match w.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr::Bool(true))
                }
                "false" => {
                    self.bump();
                    Ok(Expr::Bool(false))
                }
                "rand_bool" => {
                    self.bump();
                    self.expect_sym("(")?;
                    self.expect_sym(")")?;
                    Ok(Expr::Random(RandomExpr::Bool))
                }
                "rand_int" => {
                    self.bump();
                    Ok(Expr::Random(RandomExpr::Int(self.single_arg()?)))
                }
                "rand_bools" => {
                    self.bump();
                    Ok(Expr::Random(RandomExpr::Bools(self.single_arg()?)))
                }
                "new_bools" => {
                    self.bump();
                    Ok(Expr::NewBools(self.single_arg()?))
                }
                "len" => {
                    self.bump();
                    Ok(Expr::Len(self.single_arg()?))
                }
                _ if is_reserved(&w) => self.error(format!("unexpected keyword '{w}'")),
                _ => {
                    self.bump();
                    if self.is_sym(".") && matches!(self.peek_at(1), Tok::Ident(_)) {
                        self.bump();
                        let function = self.ident()?;
                        let args = self.args()?;
                        Ok(Expr::Call(CallTarget { class: w, function }, args))
                    } else {
                        Ok(Expr::Var(w))
                    }
                }
            },
            other => self.error(format!("expected expression, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(w) => format!("'{w}'"),
        Tok::Int(v) => format!("integer {v}"),
        Tok::Str(_) => "string literal".into(),
        Tok::Sym(s) => format!("'{s}'"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parse a complete program. Only syntax is checked here; see
/// [`super::analysis::check_well_formed`] for static semantics.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    p.program()
}

/// Parse a standalone statement block (`{ ... }`), used by tests and fixtures.
pub fn parse_block(text: &str) -> Result<Vec<Stmt>, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let b = p.block()?;
    if !matches!(p.peek(), Tok::Eof) {
        return p.error("trailing input after block");
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("manifest {\n}\nentry M.main\nclass M {\n fn main(input) {\n emit 0;\n }\n}\n")
            .unwrap();
        assert!(p.manifest.is_empty());
        assert_eq!(p.classes.len(), 1);
        assert_eq!(p.classes[0].functions[0].body, vec![Stmt::Emit(Expr::Int(0))]);
    }

    #[test]
    fn duplicate_class_is_rejected() {
        let text = "manifest {}\nentry A.main\nclass A { fn main(x) { emit x; } }\nclass A { }\n";
        let err = parse(text).unwrap_err();
        assert!(err.message.contains("duplicate class"), "{err}");
        assert_eq!(err.line, 4);
    }

    #[test]
    fn reports_position() {
        let err = parse("manifest {\n  capability\n}\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = parse("manifest {}\nentry A.main\nclass A { fn main(x) { emit x } }").unwrap_err();
        assert_eq!((err.line, err.col), (3, 31));
    }

    #[test]
    fn precedence_and_negative_literals() {
        let b = parse_block("{ let x = 1 + 2 * -3 < 4 && !y || z[0]; }").unwrap();
        let Stmt::Assign(_, e) = &b[0] else { panic!() };
        let expected = Expr::binary(
            BinOp::Or,
            Expr::binary(
                BinOp::And,
                Expr::binary(
                    BinOp::Lt,
                    Expr::binary(
                        BinOp::Add,
                        Expr::Int(1),
                        Expr::binary(BinOp::Mul, Expr::Int(2), Expr::Int(-3)),
                    ),
                    Expr::Int(4),
                ),
                Expr::not(Expr::var("y")),
            ),
            Expr::index(Expr::var("z"), Expr::Int(0)),
        );
        assert_eq!(e, &expected);
    }

    #[test]
    fn call_expression_and_statement() {
        let b = parse_block("{ let y = Util.f(1, x); call Util.g(); api net.open(\"a\\\"b\"); }")
            .unwrap();
        assert!(matches!(&b[0], Stmt::Assign(_, Expr::Call(t, a)) if t.class == "Util" && a.len() == 2));
        assert!(matches!(&b[1], Stmt::Call(t, a) if t.function == "g" && a.is_empty()));
        assert_eq!(b[2], Stmt::Api("net.open".into(), vec![Expr::Str("a\"b".into())]));
    }
}
