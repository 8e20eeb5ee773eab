//! A small infix expression language for coefficient functions.
//!
//! Expressions are parsed against a declared, ordered list of variable names
//! (for example `["x", "y1", "y2"]`) and evaluated on a slice of values in the
//! same order. Supported syntax:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          (right associative)
//! primary := number | name | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | cosh | sinh | sqrt
//! ```
//!
//! `pi` and `e` are predefined constants unless shadowed by a declared
//! variable. A non-integer exponent is only defined for a positive base.
//!
//! Partial derivatives are exact and symbolic. `e ^ f` is differentiated as an
//! exponential; every other power needs an exponent that does not depend on the
//! differentiation variable.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("variable `{0}` is not declared")]
    UndeclaredVariable(String),
    #[error("expected {expected} variable values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cannot differentiate `{0}`: exponent depends on the variable and the base is not e")]
    UnsupportedDerivative(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Cosh,
    Sinh,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> Result<f64, ExprError> {
        Ok(match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Cosh => v.cosh(),
            Func::Sinh => v.sinh(),
            Func::Sqrt => {
                if v < 0.0 {
                    return Err(ExprError::Domain(format!("sqrt of negative value {v}")));
                }
                v.sqrt()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn apply(self, l: f64, r: f64) -> Result<f64, ExprError> {
        match self {
            BinOp::Add => Ok(l + r),
            BinOp::Sub => Ok(l - r),
            BinOp::Mul => Ok(l * r),
            BinOp::Div => {
                if r == 0.0 {
                    Err(ExprError::Domain("division by zero".into()))
                } else {
                    Ok(l / r)
                }
            }
            BinOp::Pow => power(l, r),
        }
    }
}

fn power(base: f64, exp: f64) -> Result<f64, ExprError> {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        if base == 0.0 && exp < 0.0 {
            return Err(ExprError::Domain("zero raised to a negative power".into()));
        }
        Ok(base.powi(exp as i32))
    } else if base > 0.0 {
        Ok(base.powf(exp))
    } else if base == 0.0 && exp > 0.0 {
        Ok(0.0)
    } else {
        Err(ExprError::Domain(format!(
            "non-integer power {exp} of non-positive base {base}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
}

use Node::*;

fn bin(op: BinOp, l: Node, r: Node) -> Node {
    Binary(op, Box::new(l), Box::new(r))
}

impl Node {
    fn eval(&self, vals: &[f64]) -> Result<f64, ExprError> {
        match self {
            Const(c) => Ok(*c),
            Var(i) => Ok(vals[*i]),
            Neg(a) => Ok(-a.eval(vals)?),
            Call(f, a) => f.apply(a.eval(vals)?),
            Binary(op, l, r) => op.apply(l.eval(vals)?, r.eval(vals)?),
        }
    }

    fn depends_on(&self, var: usize) -> bool {
        match self {
            Const(_) => false,
            Var(i) => *i == var,
            Neg(a) | Call(_, a) => a.depends_on(var),
            Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    fn has_vars(&self) -> bool {
        match self {
            Const(_) => false,
            Var(_) => true,
            Neg(a) | Call(_, a) => a.has_vars(),
            Binary(_, l, r) => l.has_vars() || r.has_vars(),
        }
    }

    fn derivative(&self, var: usize, vars: &[String]) -> Result<Node, ExprError> {
        Ok(match self {
            Const(_) => Const(0.0),
            Var(i) => Const(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => Neg(Box::new(a.derivative(var, vars)?)),
            Call(f, a) => {
                let inner = a.derivative(var, vars)?;
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Call(Func::Cos, Box::new(a)),
                    Func::Cos => Neg(Box::new(Call(Func::Sin, Box::new(a)))),
                    Func::Exp => Call(Func::Exp, Box::new(a)),
                    Func::Cosh => Call(Func::Sinh, Box::new(a)),
                    Func::Sinh => Call(Func::Cosh, Box::new(a)),
                    Func::Sqrt => {
                        return Ok(bin(
                            BinOp::Div,
                            inner,
                            bin(BinOp::Mul, Const(2.0), Call(Func::Sqrt, Box::new(a))),
                        ))
                    }
                };
                bin(BinOp::Mul, outer, inner)
            }
            Binary(op, l, r) => {
                let (lc, rc) = ((**l).clone(), (**r).clone());
                match op {
                    BinOp::Add | BinOp::Sub => {
                        bin(*op, l.derivative(var, vars)?, r.derivative(var, vars)?)
                    }
                    BinOp::Mul => bin(
                        BinOp::Add,
                        bin(BinOp::Mul, l.derivative(var, vars)?, rc),
                        bin(BinOp::Mul, lc, r.derivative(var, vars)?),
                    ),
                    BinOp::Div => bin(
                        BinOp::Div,
                        bin(
                            BinOp::Sub,
                            bin(BinOp::Mul, l.derivative(var, vars)?, rc.clone()),
                            bin(BinOp::Mul, lc, r.derivative(var, vars)?),
                        ),
                        bin(BinOp::Pow, rc, Const(2.0)),
                    ),
                    BinOp::Pow => {
                        if !r.depends_on(var) {
                            let reduced = match rc {
                                Const(c) => Const(c - 1.0),
                                other => bin(BinOp::Sub, other, Const(1.0)),
                            };
                            bin(
                                BinOp::Mul,
                                bin(BinOp::Mul, (**r).clone(), bin(BinOp::Pow, lc, reduced)),
                                l.derivative(var, vars)?,
                            )
                        } else if matches!(**l, Const(c) if c == E) {
                            bin(BinOp::Mul, self.clone(), r.derivative(var, vars)?)
                        } else {
                            return Err(ExprError::UnsupportedDerivative(
                                Printer { node: self, vars }.to_string(),
                            ));
                        }
                    }
                }
            }
        })
    }

    fn simplify(self) -> Node {
        match self {
            Const(_) | Var(_) => self,
            Neg(a) => match a.simplify() {
                Const(c) => Const(-c),
                Neg(inner) => *inner,
                other => Neg(Box::new(other)),
            },
            Call(f, a) => {
                let a = a.simplify();
                if let Const(c) = a {
                    if let Ok(v) = f.apply(c) {
                        if v.is_finite() {
                            return Const(v);
                        }
                    }
                }
                Call(f, Box::new(a))
            }
            Binary(op, l, r) => {
                let l = l.simplify();
                let r = r.simplify();
                if let (Const(a), Const(b)) = (&l, &r) {
                    if let Ok(v) = op.apply(*a, *b) {
                        if v.is_finite() {
                            return Const(v);
                        }
                    }
                }
                let is = |n: &Node, v: f64| matches!(n, Const(c) if *c == v);
                match op {
                    BinOp::Add if is(&l, 0.0) => r,
                    BinOp::Add if is(&r, 0.0) => l,
                    BinOp::Sub if is(&r, 0.0) => l,
                    BinOp::Sub if is(&l, 0.0) => Neg(Box::new(r)).simplify(),
                    BinOp::Mul if is(&l, 0.0) || is(&r, 0.0) => Const(0.0),
                    BinOp::Mul if is(&l, 1.0) => r,
                    BinOp::Mul if is(&r, 1.0) => l,
                    BinOp::Mul if is(&l, -1.0) => Neg(Box::new(r)).simplify(),
                    BinOp::Mul if is(&r, -1.0) => Neg(Box::new(l)).simplify(),
                    BinOp::Div if is(&r, 1.0) => l,
                    BinOp::Pow if is(&r, 1.0) => l,
                    BinOp::Pow if is(&r, 0.0) || is(&l, 1.0) => Const(1.0),
                    _ => bin(op, l, r),
                }
            }
        }
    }
}

/// A parsed expression together with the ordered variable list it was parsed against.
///
/// Immutable and cheap to clone; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    node: Node,
    vars: Arc<[String]>,
}

impl Expr {
    pub fn parse<S: AsRef<str>>(text: &str, variables: &[S]) -> Result<Expr, ExprError> {
        let vars: Arc<[String]> = variables.iter().map(|s| s.as_ref().to_string()).collect();
        let tokens = tokenize(text)?;
        if tokens.len() == 1 {
            return Err(ExprError::Syntax {
                position: 0,
                message: "empty expression".into(),
            });
        }
        let mut parser = Parser {
            tokens,
            pos: 0,
            vars: &vars,
        };
        let node = parser.expr()?;
        let tok = parser.peek();
        if tok.kind != Tok::End {
            return Err(ExprError::Syntax {
                position: tok.position,
                message: format!("unexpected {}", tok.kind.describe()),
            });
        }
        Ok(Expr { node, vars })
    }

    pub fn constant<S: AsRef<str>>(value: f64, variables: &[S]) -> Expr {
        Expr {
            node: Const(value),
            vars: variables.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    fn index_of(&self, name: &str) -> Result<usize, ExprError> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| ExprError::UndeclaredVariable(name.to_string()))
    }

    /// Evaluates at `values`, given in declaration order.
    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        if values.len() != self.vars.len() {
            return Err(ExprError::Arity {
                expected: self.vars.len(),
                got: values.len(),
            });
        }
        let v = self.node.eval(values)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain(format!("non-finite result {v}")))
        }
    }

    /// Exact partial derivative with respect to `var`, simplified.
    pub fn differentiate(&self, var: &str) -> Result<Expr, ExprError> {
        let idx = self.index_of(var)?;
        let node = self.node.derivative(idx, &self.vars)?.simplify();
        Ok(Expr {
            node,
            vars: self.vars.clone(),
        })
    }

    /// Constant folding and identity elimination only.
    pub fn simplify(&self) -> Expr {
        Expr {
            node: self.node.clone().simplify(),
            vars: self.vars.clone(),
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        self.index_of(var)
            .map(|i| self.node.depends_on(i))
            .unwrap_or(false)
    }

    /// The value of a variable-free expression, after folding.
    pub fn as_constant(&self) -> Option<f64> {
        if self.node.has_vars() {
            return None;
        }
        match self.node.clone().simplify() {
            Const(c) => Some(c),
            _ => self.node.eval(&[]).ok(),
        }
    }

    /// Re-expresses this expression over a larger variable list. Every variable
    /// used must appear in `variables`.
    pub fn rebind<S: AsRef<str>>(&self, variables: &[S]) -> Result<Expr, ExprError> {
        let vars: Arc<[String]> = variables.iter().map(|s| s.as_ref().to_string()).collect();
        let map = self
            .vars
            .iter()
            .map(|v| vars.iter().position(|w| w == v))
            .collect::<Vec<_>>();
        fn remap(n: &Node, map: &[Option<usize>], names: &[String]) -> Result<Node, ExprError> {
            Ok(match n {
                Const(c) => Const(*c),
                Var(i) => Var(map[*i].ok_or_else(|| ExprError::UndeclaredVariable(names[*i].clone()))?),
                Neg(a) => Neg(Box::new(remap(a, map, names)?)),
                Call(f, a) => Call(*f, Box::new(remap(a, map, names)?)),
                Binary(op, l, r) => bin(*op, remap(l, map, names)?, remap(r, map, names)?),
            })
        }
        Ok(Expr {
            node: remap(&self.node, &map, &self.vars)?,
            vars,
        })
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        fn count(n: &Node) -> usize {
            match n {
                Const(_) | Var(_) => 1,
                Neg(a) | Call(_, a) => 1 + count(a),
                Binary(_, l, r) => 1 + count(l) + count(r),
            }
        }
        count(&self.node)
    }
}

struct Printer<'a> {
    node: &'a Node,
    vars: &'a [String],
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |node| Printer {
            node,
            vars: self.vars,
        };
        match self.node {
            Const(c) if *c == PI => write!(f, "pi"),
            Const(c) if *c == E => write!(f, "e"),
            Const(c) if c.is_sign_negative() => write!(f, "(-{})", -c),
            Const(c) => write!(f, "{c}"),
            Var(i) => write!(f, "{}", self.vars[*i]),
            Neg(a) => write!(f, "(-{})", sub(a)),
            Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
            Binary(op, l, r) => write!(f, "({} {} {})", sub(l), op.symbol(), sub(r)),
        }
    }
}

/// Fully parenthesised infix; parses back to an expression with identical values.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            node: &self.node,
            vars: &self.vars,
        }
        .fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("operator `{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    position: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v = lit.parse::<f64>().map_err(|_| ExprError::Syntax {
                    position: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                out.push(Token {
                    kind: Tok::Num(v),
                    position: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: Tok::Ident(text[start..i].to_string()),
                    position: start,
                });
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                out.push(Token {
                    kind: Tok::Op(c as char),
                    position: start,
                });
            }
            b'(' | b')' => {
                i += 1;
                out.push(Token {
                    kind: if c == b'(' { Tok::LParen } else { Tok::RParen },
                    position: start,
                });
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    position: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    out.push(Token {
        kind: Tok::End,
        position: text.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: Tok) -> Result<(), ExprError> {
        let t = self.next();
        if t.kind == kind {
            Ok(())
        } else {
            Err(ExprError::Syntax {
                position: t.position,
                message: format!("expected {}, found {}", kind.describe(), t.kind.describe()),
            })
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek().kind {
            Tok::Op('-') => {
                self.next();
                Ok(Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.peek().kind == Tok::Op('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let t = self.next();
        match t.kind {
            Tok::Num(v) => Ok(Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek().kind == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ExprError::UnknownIdentifier {
                        name,
                        position: t.position,
                    })?;
                    self.next();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Call(func, Box::new(arg)));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Var(i))
                } else if name == "pi" {
                    Ok(Const(PI))
                } else if name == "e" {
                    Ok(Const(E))
                } else {
                    Err(ExprError::UnknownIdentifier {
                        name,
                        position: t.position,
                    })
                }
            }
            other => Err(ExprError::Syntax {
                position: t.position,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}
