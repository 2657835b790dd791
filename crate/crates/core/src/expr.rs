//! Arithmetic expressions for map coordinates and grey-level functions.
//!
//! # Syntax
//!
//! ```text
//! a + b, a - b        lowest precedence, left associative
//! a * b, a / b        left associative
//! -a, +a              unary sign
//! a ^ b               power, right associative, binds tighter than unary minus
//! sin cos abs sqrt floor exp   one argument
//! min max             two or more arguments
//! 1, 0.25, 2.5e-4     decimal and scientific literals
//! ```
//!
//! `-2^2` is `-(2^2)`, and `2^-1` is `2^(-1)`. Whitespace is ignored.
//! Variables are resolved against a caller-supplied list at parse time, so an
//! evaluated expression never looks a name up.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character '{found}' at column {column}")]
    UnexpectedChar { column: usize, found: char },
    #[error("expected {expected} at column {column}, found {found}")]
    Unexpected {
        column: usize,
        expected: &'static str,
        found: String,
    },
    #[error("invalid number '{text}' at column {column}")]
    BadNumber { column: usize, text: String },
    #[error("undeclared variable '{name}' at column {column}")]
    UnknownVariable { column: usize, name: String },
    #[error("unknown function '{name}' at column {column}")]
    UnknownFunction { column: usize, name: String },
    #[error("function '{name}' at column {column} takes {expected} argument(s), got {found}")]
    Arity {
        column: usize,
        name: &'static str,
        expected: &'static str,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative number {0}")]
    NegativeSqrt(f64),
    #[error("non-finite result")]
    NonFinite,
    #[error("expression expects {expected} variable value(s), got {found}")]
    MissingBinding { expected: usize, found: usize },
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
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Abs,
    Sqrt,
    Floor,
    Exp,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "floor" => Func::Floor,
            "exp" => Func::Exp,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Floor => "floor",
            Func::Exp => "exp",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn is_variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

/// Expression tree node. Variables are slot indices into the binding slice.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with the names of its variable slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    slots: Vec<String>,
}

/// `constant + Σ coeffs[i]·slot[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParts {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl Expression {
    /// Parses `source` with variables bound positionally to `variables`.
    pub fn parse(source: &str, variables: &[&str]) -> Result<Self, ParseError> {
        let table: Vec<(&str, usize)> = variables.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        Self::parse_with_aliases(source, &table, variables.len())
    }

    /// Parses `source` where several names may refer to the same slot
    /// (e.g. `x` and `x1`). The first name given for a slot is used when printing.
    pub fn parse_with_aliases(
        source: &str,
        names: &[(&str, usize)],
        slot_count: usize,
    ) -> Result<Self, ParseError> {
        let mut slots = vec![String::new(); slot_count];
        for (name, slot) in names.iter().rev() {
            if *slot < slot_count {
                slots[*slot] = (*name).to_string();
            }
        }
        let tokens = lex(source)?;
        if tokens.len() == 1 {
            return Err(ParseError::Empty);
        }
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            names,
        };
        let root = parser.expr()?;
        let tok = parser.peek();
        if tok.kind != TokKind::End {
            return Err(ParseError::Unexpected {
                column: tok.column,
                expected: "operator or end of input",
                found: tok.kind.describe(),
            });
        }
        Ok(Expression { root, slots })
    }

    pub fn constant(value: f64) -> Self {
        Expression {
            root: Node::Num(value),
            slots: Vec::new(),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_names(&self) -> &[String] {
        &self.slots
    }

    /// Evaluates with `values[i]` bound to slot `i`.
    pub fn evaluate(&self, values: &[f64]) -> Result<f64, EvalError> {
        if values.len() < self.slots.len() {
            return Err(EvalError::MissingBinding {
                expected: self.slots.len(),
                found: values.len(),
            });
        }
        let v = eval_node(&self.root, values)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluates with named bindings; every slot must be bound by its primary name.
    pub fn evaluate_named(&self, bindings: &[(&str, f64)]) -> Result<f64, EvalError> {
        let mut values = vec![f64::NAN; self.slots.len()];
        let mut bound = 0;
        for (i, name) in self.slots.iter().enumerate() {
            if let Some((_, v)) = bindings.iter().find(|(n, _)| n == name) {
                values[i] = *v;
                bound += 1;
            }
        }
        if bound < self.slots.len() && self.uses_any_unbound(&values) {
            return Err(EvalError::MissingBinding {
                expected: self.slots.len(),
                found: bound,
            });
        }
        self.evaluate(&values)
    }

    fn uses_any_unbound(&self, values: &[f64]) -> bool {
        fn walk(node: &Node, values: &[f64]) -> bool {
            match node {
                Node::Num(_) => false,
                Node::Var(i) => values[*i].is_nan(),
                Node::Neg(a) => walk(a, values),
                Node::Binary(_, a, b) => walk(a, values) || walk(b, values),
                Node::Call(_, args) => args.iter().any(|a| walk(a, values)),
            }
        }
        walk(&self.root, values)
    }

    /// Returns the affine decomposition when the tree is affine in its slots
    /// (sums, differences, scaling by constants, division by nonzero constants).
    pub fn affine_parts(&self) -> Option<AffineParts> {
        affine(&self.root, self.slots.len())
    }

    /// True when the expression does not reference any variable.
    pub fn is_constant(&self) -> bool {
        self.affine_parts()
            .map(|a| a.coeffs.iter().all(|c| *c == 0.0))
            .unwrap_or(false)
    }
}

fn eval_node(node: &Node, values: &[f64]) -> Result<f64, EvalError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(i) => values[*i],
        Node::Neg(a) => -eval_node(a, values)?,
        Node::Binary(op, a, b) => {
            let x = eval_node(a, values)?;
            let y = eval_node(b, values)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    x / y
                }
                BinOp::Pow => {
                    let r = math::pow(x, y);
                    if r.is_nan() {
                        return Err(EvalError::NonFinite);
                    }
                    r
                }
            }
        }
        Node::Call(f, args) => {
            let first = eval_node(&args[0], values)?;
            match f {
                Func::Sin => libm::sin(first),
                Func::Cos => libm::cos(first),
                Func::Abs => math::abs(first),
                Func::Sqrt => {
                    if first < 0.0 {
                        return Err(EvalError::NegativeSqrt(first));
                    }
                    math::sqrt(first)
                }
                Func::Floor => math::floor(first),
                Func::Exp => libm::exp(first),
                Func::Min | Func::Max => {
                    let mut acc = first;
                    for a in &args[1..] {
                        let v = eval_node(a, values)?;
                        acc = if *f == Func::Min { acc.min(v) } else { acc.max(v) };
                    }
                    acc
                }
            }
        }
    })
}

fn affine(node: &Node, n: usize) -> Option<AffineParts> {
    let konst = |c: f64| AffineParts {
        coeffs: vec![0.0; n],
        constant: c,
    };
    let is_const = |a: &AffineParts| a.coeffs.iter().all(|c| *c == 0.0);
    Some(match node {
        Node::Num(v) => konst(*v),
        Node::Var(i) => {
            let mut a = konst(0.0);
            a.coeffs[*i] = 1.0;
            a
        }
        Node::Neg(a) => {
            let mut a = affine(a, n)?;
            a.coeffs.iter_mut().for_each(|c| *c = -*c);
            a.constant = -a.constant;
            a
        }
        Node::Binary(op, l, r) => {
            let l = affine(l, n)?;
            let r = affine(r, n)?;
            match op {
                BinOp::Add | BinOp::Sub => {
                    let s = if *op == BinOp::Add { 1.0 } else { -1.0 };
                    AffineParts {
                        coeffs: l.coeffs.iter().zip(&r.coeffs).map(|(a, b)| a + s * b).collect(),
                        constant: l.constant + s * r.constant,
                    }
                }
                BinOp::Mul => {
                    let (k, other) = if is_const(&l) {
                        (l.constant, r)
                    } else if is_const(&r) {
                        (r.constant, l)
                    } else {
                        return None;
                    };
                    AffineParts {
                        coeffs: other.coeffs.iter().map(|c| c * k).collect(),
                        constant: other.constant * k,
                    }
                }
                BinOp::Div => {
                    if !is_const(&r) || r.constant == 0.0 {
                        return None;
                    }
                    AffineParts {
                        coeffs: l.coeffs.iter().map(|c| c / r.constant).collect(),
                        constant: l.constant / r.constant,
                    }
                }
                BinOp::Pow => {
                    if !is_const(&r) {
                        return None;
                    }
                    if is_const(&l) {
                        konst(math::pow(l.constant, r.constant))
                    } else if r.constant == 1.0 {
                        l
                    } else {
                        return None;
                    }
                }
            }
        }
        Node::Call(_, args) => {
            let parts: Option<Vec<_>> = args.iter().map(|a| affine(a, n)).collect();
            if !parts?.iter().all(is_const) {
                return None;
            }
            let zeros = vec![0.0; n];
            konst(eval_node(node, &zeros).ok()?)
        }
    })
}

impl fmt::Display for Expression {
    /// Fully parenthesized; re-parsing the output reproduces the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.slots, f)
    }
}

fn write_node(node: &Node, slots: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Num(v) => {
            if *v < 0.0 {
                write!(f, "(-{})", -v)
            } else {
                write!(f, "{v}")
            }
        }
        Node::Var(i) => f.write_str(&slots[*i]),
        Node::Neg(a) => {
            f.write_str("(-")?;
            write_node(a, slots, f)?;
            f.write_str(")")
        }
        Node::Binary(op, a, b) => {
            f.write_str("(")?;
            write_node(a, slots, f)?;
            write!(f, " {} ", op.symbol())?;
            write_node(b, slots, f)?;
            f.write_str(")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_node(a, slots, f)?;
            }
            f.write_str(")")
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => alloc::format!("number {v}"),
            TokKind::Ident(s) => alloc::format!("'{s}'"),
            TokKind::Op(c) => alloc::format!("'{c}'"),
            TokKind::LParen => "'('".to_string(),
            TokKind::RParen => "')'".to_string(),
            TokKind::Comma => "','".to_string(),
            TokKind::End => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    column: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ParseError::BadNumber {
                column,
                text: text.clone(),
            })?;
            if !value.is_finite() {
                return Err(ParseError::BadNumber { column, text });
            }
            out.push(Token {
                kind: TokKind::Num(value),
                column,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            ',' => TokKind::Comma,
            _ => return Err(ParseError::UnexpectedChar { column, found: c }),
        };
        out.push(Token { kind, column });
        i += 1;
    }
    out.push(Token {
        kind: TokKind::End,
        column: chars.len() + 1,
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Recursive descent parser

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    names: &'a [(&'a str, usize)],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let TokKind::Op(c @ ('+' | '-')) = self.peek().kind {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let TokKind::Op(c @ ('*' | '/')) = self.peek().kind {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek().kind {
            TokKind::Op('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            TokKind::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.peek().kind == TokKind::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let tok = self.bump();
        match tok.kind {
            TokKind::Num(v) => Ok(Node::Num(v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                if self.peek().kind == TokKind::LParen {
                    self.bump();
                    let func = Func::lookup(&name).ok_or(ParseError::UnknownFunction {
                        column: tok.column,
                        name: name.clone(),
                    })?;
                    let mut args = Vec::new();
                    if self.peek().kind != TokKind::RParen {
                        args.push(self.expr()?);
                        while self.peek().kind == TokKind::Comma {
                            self.bump();
                            args.push(self.expr()?);
                        }
                    }
                    self.expect_rparen()?;
                    let ok = if func.is_variadic() {
                        args.len() >= 2
                    } else {
                        args.len() == 1
                    };
                    if !ok {
                        return Err(ParseError::Arity {
                            column: tok.column,
                            name: func.name(),
                            expected: if func.is_variadic() { "2 or more" } else { "1" },
                            found: args.len(),
                        });
                    }
                    return Ok(Node::Call(func, args));
                }
                match self.names.iter().find(|(n, _)| *n == name) {
                    Some((_, slot)) => Ok(Node::Var(*slot)),
                    None => Err(ParseError::UnknownVariable {
                        column: tok.column,
                        name,
                    }),
                }
            }
            other => Err(ParseError::Unexpected {
                column: tok.column,
                expected: "number, variable, function or '('",
                found: other.describe(),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let tok = self.bump();
        if tok.kind == TokKind::RParen {
            Ok(())
        } else {
            Err(ParseError::Unexpected {
                column: tok.column,
                expected: "')'",
                found: tok.kind.describe(),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Grey-level maps

/// Value of one interval of a [`PiecewiseMap`].
#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Const(f64),
    Expr(Expression),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PiecewiseError {
    #[error("piecewise map has no intervals")]
    Empty,
    #[error("first breakpoint must be 0, got {0}")]
    FirstNotZero(f64),
    #[error("breakpoints must be strictly increasing and at most 1 (offending value {0})")]
    BadBreakpoint(f64),
}

/// Step-like function on [0,1]: interval `i` is `[start_i, start_{i+1})`,
/// the last one closed at 1. Each piece is evaluated at `t` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseMap {
    starts: Vec<f64>,
    pieces: Vec<Piece>,
}

impl PiecewiseMap {
    pub fn new(intervals: Vec<(f64, Piece)>) -> Result<Self, PiecewiseError> {
        let first = intervals.first().ok_or(PiecewiseError::Empty)?.0;
        if first != 0.0 {
            return Err(PiecewiseError::FirstNotZero(first));
        }
        for w in intervals.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].0 > 1.0 {
                return Err(PiecewiseError::BadBreakpoint(w[1].0));
            }
        }
        let (starts, pieces) = intervals.into_iter().unzip();
        Ok(PiecewiseMap { starts, pieces })
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, &Piece)> {
        self.starts.iter().copied().zip(self.pieces.iter())
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let idx = self.starts.partition_point(|s| *s <= t).max(1) - 1;
        match &self.pieces[idx] {
            Piece::Const(v) => Ok(*v),
            Piece::Expr(e) => e.evaluate(&[t]),
        }
    }
}

/// Grey-level map ρ: [0,1] → [0,1], either one expression in `t` or piecewise.
#[derive(Debug, Clone, PartialEq)]
pub enum GreyMap {
    Expr(Expression),
    Piecewise(PiecewiseMap),
}

/// Result of a grey-map evaluation; `clamped` is set when the raw value left [0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreyValue {
    pub value: f64,
    pub clamped: bool,
}

impl GreyMap {
    pub fn identity() -> Self {
        GreyMap::Expr(Expression {
            root: Node::Var(0),
            slots: vec!["t".to_string()],
        })
    }

    /// Parses a single-expression grey map over the variable `t`.
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Ok(GreyMap::Expr(Expression::parse(source, &["t"])?))
    }

    pub fn eval(&self, t: f64) -> Result<GreyValue, EvalError> {
        let t = t.clamp(0.0, 1.0);
        let raw = match self {
            GreyMap::Expr(e) => e.evaluate(&[t])?,
            GreyMap::Piecewise(p) => p.eval(t)?,
        };
        let value = raw.clamp(0.0, 1.0);
        Ok(GreyValue {
            value,
            clamped: value != raw,
        })
    }

    /// Evaluates and drops the clamp flag.
    pub fn value(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(t).map(|g| g.value)
    }
}

/// `eval_grey` from the operation list: clamps to [0,1] and reports clamping.
pub fn eval_grey(map: &GreyMap, t: f64) -> Result<GreyValue, EvalError> {
    map.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, vars: &[&str], vals: &[f64]) -> f64 {
        Expression::parse(src, vars).unwrap().evaluate(vals).unwrap()
    }

    fn step_map() -> GreyMap {
        GreyMap::Piecewise(
            PiecewiseMap::new(vec![
                (0.0, Piece::Const(0.0)),
                (0.2505, Piece::Const(0.25)),
                (0.505, Piece::Const(0.5)),
                (0.7505, Piece::Const(0.75)),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn precedence_and_literals() {
        assert_eq!(ev("2+3*4", &[], &[]), 14.0);
        assert_eq!(ev("0.5*x1+0.25", &["x1"], &[1.0]), 0.75);
        assert_eq!(ev("sin(t)", &["t"], &[0.0]), 0.0);
        assert_eq!(ev("x1^2", &["x1"], &[3.0]), 9.0);
        assert_eq!(ev("-2^2", &[], &[]), -4.0);
        assert_eq!(ev("2^3^2", &[], &[]), 512.0);
        assert_eq!(ev("2^-1", &[], &[]), 0.5);
        assert_eq!(ev("2.5e-4 * 4", &[], &[]), 1e-3);
        assert_eq!(ev("10 - 4 - 3", &[], &[]), 3.0);
        assert_eq!(ev("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(ev("max(1, 3, 2) - min(4, -1)", &[], &[]), 4.0);
        assert_eq!(ev("floor(2.7) + abs(-1) + sqrt(4) + exp(0) + cos(0)", &[], &[]), 7.0);
    }

    #[test]
    fn maple_leaf_constant_term() {
        let v = ev("0.355*x1 - 0.355*y1 + 0.266", &["x1", "y1"], &[0.0, 0.0]);
        assert_eq!(v, 0.266);
    }

    #[test]
    fn domain_errors() {
        let e = Expression::parse("1/x1", &["x1"]).unwrap();
        assert_eq!(e.evaluate(&[0.0]), Err(EvalError::DivisionByZero));
        let e = Expression::parse("sqrt(x1)", &["x1"]).unwrap();
        assert!(matches!(e.evaluate(&[-1.0]), Err(EvalError::NegativeSqrt(_))));
        let e = Expression::parse("(-8)^0.5", &[]).unwrap();
        assert_eq!(e.evaluate(&[]), Err(EvalError::NonFinite));
    }

    #[test]
    fn parse_errors_carry_columns() {
        assert_eq!(
            Expression::parse("x1 + z", &["x1"]),
            Err(ParseError::UnknownVariable {
                column: 6,
                name: "z".into()
            })
        );
        assert!(matches!(
            Expression::parse("2 + * 3", &[]),
            Err(ParseError::Unexpected { column: 5, .. })
        ));
        assert!(matches!(
            Expression::parse("(1 + 2", &[]),
            Err(ParseError::Unexpected { column: 7, .. })
        ));
        assert!(matches!(
            Expression::parse("1 $ 2", &[]),
            Err(ParseError::UnexpectedChar { column: 3, found: '$' })
        ));
        assert!(matches!(
            Expression::parse("tan(1)", &[]),
            Err(ParseError::UnknownFunction { .. })
        ));
        assert!(matches!(
            Expression::parse("sin(1, 2)", &[]),
            Err(ParseError::Arity { found: 2, .. })
        ));
        assert!(matches!(
            Expression::parse("max(1)", &[]),
            Err(ParseError::Arity { found: 1, .. })
        ));
        assert_eq!(Expression::parse("   ", &[]), Err(ParseError::Empty));
        assert!(matches!(Expression::parse("1 2", &[]), Err(ParseError::Unexpected { .. })));
        assert!(matches!(Expression::parse("1.2.3", &[]), Err(ParseError::BadNumber { .. })));
    }

    #[test]
    fn aliases_share_a_slot() {
        let e = Expression::parse_with_aliases("x + x1 + y", &[("x1", 0), ("y1", 1), ("x", 0), ("y", 1)], 2)
            .unwrap();
        assert_eq!(e.evaluate(&[1.0, 10.0]).unwrap(), 12.0);
        assert_eq!(e.slot_names(), ["x1", "y1"]);
        assert_eq!(e.evaluate_named(&[("x1", 1.0), ("y1", 2.0)]).unwrap(), 4.0);
    }

    #[test]
    fn affine_extraction() {
        let vars = ["x1", "y1", "x2", "y2"];
        let e = Expression::parse("0.1*x1 - 0.15*y1 - 0.1*x2 + 0.15*y2 + 1.6", &vars).unwrap();
        let a = e.affine_parts().unwrap();
        assert_eq!(a.coeffs, vec![0.1, -0.15, -0.1, 0.15]);
        assert_eq!(a.constant, 1.6);

        let e = Expression::parse("(x1 + 1) / 2 - -y1 * 3", &["x1", "y1"]).unwrap();
        let a = e.affine_parts().unwrap();
        assert_eq!(a.coeffs, vec![0.5, 3.0]);
        assert_eq!(a.constant, 0.5);

        assert!(Expression::parse("x1*y1", &["x1", "y1"]).unwrap().affine_parts().is_none());
        assert!(Expression::parse("sin(x1)", &["x1"]).unwrap().affine_parts().is_none());
        assert!(Expression::parse("x1^2", &["x1"]).unwrap().affine_parts().is_none());
        let c = Expression::parse("sqrt(4) * x1^1 + 2^2", &["x1"]).unwrap().affine_parts().unwrap();
        assert_eq!(c.coeffs, vec![2.0]);
        assert_eq!(c.constant, 4.0);
        assert!(Expression::parse("0.486", &["x1"]).unwrap().is_constant());
    }

    #[test]
    fn example_step_grey_map() {
        let rho = step_map();
        assert_eq!(rho.value(0.5).unwrap(), 0.25);
        assert_eq!(rho.value(0.25).unwrap(), 0.0);
        assert_eq!(rho.value(0.2505).unwrap(), 0.25);
        assert_eq!(rho.value(1.0).unwrap(), 0.75);
        assert_eq!(rho.value(0.0).unwrap(), 0.0);
        assert_eq!(GreyMap::identity().value(0.7).unwrap(), 0.7);
    }

    #[test]
    fn piecewise_with_expression_pieces() {
        // ρ(t) = 0.25 t on [0, 0.25), t - 0.18 on [0.25, 1]
        let t = |s: &str| Piece::Expr(Expression::parse(s, &["t"]).unwrap());
        let rho = GreyMap::Piecewise(PiecewiseMap::new(vec![(0.0, t("0.25*t")), (0.25, t("t - 0.18"))]).unwrap());
        assert_eq!(rho.value(0.2).unwrap(), 0.05);
        assert!((rho.value(0.25).unwrap() - 0.07).abs() < 1e-15);
        assert!((rho.value(1.0).unwrap() - 0.82).abs() < 1e-15);
    }

    #[test]
    fn piecewise_validation() {
        assert_eq!(PiecewiseMap::new(vec![]), Err(PiecewiseError::Empty));
        assert_eq!(
            PiecewiseMap::new(vec![(0.1, Piece::Const(0.0))]),
            Err(PiecewiseError::FirstNotZero(0.1))
        );
        assert_eq!(
            PiecewiseMap::new(vec![(0.0, Piece::Const(0.0)), (0.5, Piece::Const(1.0)), (0.5, Piece::Const(1.0))]),
            Err(PiecewiseError::BadBreakpoint(0.5))
        );
        assert_eq!(
            PiecewiseMap::new(vec![(0.0, Piece::Const(0.0)), (1.5, Piece::Const(1.0))]),
            Err(PiecewiseError::BadBreakpoint(1.5))
        );
    }

    #[test]
    fn grey_expression_is_clamped_and_flagged() {
        let rho = GreyMap::parse("2*t").unwrap();
        let g = eval_grey(&rho, 0.75).unwrap();
        assert_eq!(g, GreyValue { value: 1.0, clamped: true });
        let g = eval_grey(&rho, 0.25).unwrap();
        assert_eq!(g, GreyValue { value: 0.5, clamped: false });
    }

    #[test]
    fn step_map_is_monotone_on_dense_scan() {
        let rho = step_map();
        let mut prev = rho.value(0.0).unwrap();
        for k in 1..=10_000 {
            let v = rho.value(k as f64 / 10_000.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_node(depth: u32) -> BoxedStrategy<Node> {
            let leaf = prop_oneof![
                (0.0f64..100.0).prop_map(Node::Num),
                (0usize..2).prop_map(Node::Var),
            ];
            leaf.prop_recursive(depth, 32, 3, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
                    (
                        prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)],
                        inner.clone(),
                        inner.clone()
                    )
                        .prop_map(|(op, a, b)| Node::Binary(op, Box::new(a), Box::new(b))),
                    inner.clone().prop_map(|a| Node::Call(Func::Sin, vec![a])),
                    (inner.clone(), inner).prop_map(|(a, b)| Node::Call(Func::Max, vec![a, b])),
                ]
            })
            .boxed()
        }

        proptest! {
            #[test]
            fn display_round_trips(root in arb_node(4), binds in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 100)) {
                let e = Expression { root, slots: vec!["x1".into(), "y1".into()] };
                let printed = alloc::format!("{e}");
                let back = Expression::parse(&printed, &["x1", "y1"]).unwrap();
                for (x, y) in binds {
                    let a = e.evaluate(&[x, y]);
                    let b = back.evaluate(&[x, y]);
                    match (a, b) {
                        (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                        (Err(a), Err(b)) => prop_assert_eq!(a, b),
                        (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
                    }
                }
            }

            #[test]
            fn piecewise_nondecreasing_values_give_monotone_map(mut vals in proptest::collection::vec(0.0f64..=1.0, 1..6)) {
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                vals[0] = 0.0;
                let n = vals.len();
                let pieces = vals.iter().enumerate().map(|(i, v)| (i as f64 / n as f64, Piece::Const(*v))).collect();
                let rho = GreyMap::Piecewise(PiecewiseMap::new(pieces).unwrap());
                prop_assert_eq!(rho.value(0.0).unwrap(), 0.0);
                let mut prev = 0.0;
                for k in 0..=10_000 {
                    let v = rho.value(k as f64 / 10_000.0).unwrap();
                    prop_assert!(v >= prev);
                    prev = v;
                }
            }
        }
    }
}
