//! Scalar coefficient fields on the base chart.
//!
//! A [`ScalarField`] is an immutable expression DAG over the base coordinates
//! `x^0 .. x^{m-1}`. Subtrees are shared through `Arc`, and every transform
//! (differentiation, substitution, compilation) memoizes on node identity so
//! shared subtrees are visited once.
//!
//! Construction through the arithmetic operators folds constants and the
//! additive/multiplicative units. That keeps structurally-zero coefficients
//! out of sparse forms; it is not a simplifier, and equality between fields is
//! only ever decided numerically.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{EvalError, ParseError};

/// Expression node. Children are shared [`ScalarField`] handles.
#[derive(Debug)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(ScalarField),
    Add(ScalarField, ScalarField),
    Sub(ScalarField, ScalarField),
    Mul(ScalarField, ScalarField),
    Div(ScalarField, ScalarField),
    Pow(ScalarField, i32),
    Sin(ScalarField),
    Cos(ScalarField),
    Exp(ScalarField),
    /// Only produced programmatically (orthonormalization); not part of the
    /// textual grammar.
    Sqrt(ScalarField),
}

#[derive(Clone, Debug)]
pub struct ScalarField(Arc<Node>);

impl ScalarField {
    fn from_node(node: Node) -> Self {
        ScalarField(Arc::new(node))
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// Coordinate function `x^index`.
    pub fn var(index: usize) -> Self {
        Self::from_node(Node::Var(index))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Structural zero test. A field that merely evaluates to zero is not
    /// reported as zero.
    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    fn ptr(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    /// Balanced sum, keeps tree depth logarithmic in the number of terms.
    pub fn sum<I: IntoIterator<Item = ScalarField>>(terms: I) -> ScalarField {
        let mut items: Vec<ScalarField> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        if items.is_empty() {
            return ScalarField::zero();
        }
        while items.len() > 1 {
            let mut next = Vec::with_capacity(items.len().div_ceil(2));
            let mut it = items.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(&a + &b),
                    None => next.push(a),
                }
            }
            items = next;
        }
        items.pop().unwrap()
    }

    pub fn powi(&self, n: i32) -> ScalarField {
        match n {
            0 => return ScalarField::one(),
            1 => return self.clone(),
            _ => {}
        }
        if let Some(c) = self.as_const() {
            if c != 0.0 || n > 0 {
                return ScalarField::constant(c.powi(n));
            }
        }
        Self::from_node(Node::Pow(self.clone(), n))
    }

    pub fn sin(&self) -> ScalarField {
        match self.as_const() {
            Some(c) => ScalarField::constant(c.sin()),
            None => Self::from_node(Node::Sin(self.clone())),
        }
    }

    pub fn cos(&self) -> ScalarField {
        match self.as_const() {
            Some(c) => ScalarField::constant(c.cos()),
            None => Self::from_node(Node::Cos(self.clone())),
        }
    }

    pub fn exp(&self) -> ScalarField {
        match self.as_const() {
            Some(c) => ScalarField::constant(c.exp()),
            None => Self::from_node(Node::Exp(self.clone())),
        }
    }

    pub fn sqrt(&self) -> ScalarField {
        match self.as_const() {
            Some(c) if c >= 0.0 => ScalarField::constant(c.sqrt()),
            _ => Self::from_node(Node::Sqrt(self.clone())),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        let mut seen = HashMap::new();
        max_var_rec(self, &mut seen)
    }

    /// Exact partial derivative with respect to coordinate `var`.
    pub fn derivative(&self, var: usize) -> ScalarField {
        let mut memo = HashMap::new();
        derive_rec(self, var, &mut memo)
    }

    /// Replaces coordinate `var` by `value` everywhere.
    pub fn substitute(&self, var: usize, value: &ScalarField) -> ScalarField {
        let mut memo = HashMap::new();
        subst_rec(self, var, value, &mut memo)
    }

    /// Evaluates at `point`. For repeated evaluation compile a [`Tape`].
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let tape = Tape::compile([self]);
        let mut out = Vec::with_capacity(1);
        tape.eval(point, &mut out)?;
        Ok(out[0])
    }

    /// Infix rendering with the given coordinate names.
    pub fn display<'a>(&'a self, names: &'a [String]) -> FieldDisplay<'a> {
        FieldDisplay { field: self, names }
    }
}

fn max_var_rec(f: &ScalarField, seen: &mut HashMap<*const Node, Option<usize>>) -> Option<usize> {
    if let Some(v) = seen.get(&f.ptr()) {
        return *v;
    }
    let r = match f.node() {
        Node::Const(_) => None,
        Node::Var(i) => Some(*i),
        Node::Neg(a)
        | Node::Pow(a, _)
        | Node::Sin(a)
        | Node::Cos(a)
        | Node::Exp(a)
        | Node::Sqrt(a) => max_var_rec(a, seen),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            max_var_rec(a, seen).max(max_var_rec(b, seen))
        }
    };
    seen.insert(f.ptr(), r);
    r
}

fn derive_rec(
    f: &ScalarField,
    var: usize,
    memo: &mut HashMap<*const Node, ScalarField>,
) -> ScalarField {
    if let Some(d) = memo.get(&f.ptr()) {
        return d.clone();
    }
    let d = match f.node() {
        Node::Const(_) => ScalarField::zero(),
        Node::Var(i) => {
            if *i == var {
                ScalarField::one()
            } else {
                ScalarField::zero()
            }
        }
        Node::Neg(a) => -derive_rec(a, var, memo),
        Node::Add(a, b) => derive_rec(a, var, memo) + derive_rec(b, var, memo),
        Node::Sub(a, b) => derive_rec(a, var, memo) - derive_rec(b, var, memo),
        Node::Mul(a, b) => {
            let da = derive_rec(a, var, memo);
            let db = derive_rec(b, var, memo);
            &da * b + a * &db
        }
        Node::Div(a, b) => {
            let da = derive_rec(a, var, memo);
            let db = derive_rec(b, var, memo);
            if db.is_zero() {
                &da / b
            } else {
                (&da * b - a * &db) / b.powi(2)
            }
        }
        Node::Pow(a, n) => {
            let da = derive_rec(a, var, memo);
            ScalarField::constant(*n as f64) * a.powi(n - 1) * da
        }
        Node::Sin(a) => {
            let da = derive_rec(a, var, memo);
            a.cos() * da
        }
        Node::Cos(a) => {
            let da = derive_rec(a, var, memo);
            -(a.sin() * da)
        }
        Node::Exp(a) => {
            let da = derive_rec(a, var, memo);
            f * &da
        }
        Node::Sqrt(a) => {
            let da = derive_rec(a, var, memo);
            da / (ScalarField::constant(2.0) * f)
        }
    };
    memo.insert(f.ptr(), d.clone());
    d
}

fn subst_rec(
    f: &ScalarField,
    var: usize,
    value: &ScalarField,
    memo: &mut HashMap<*const Node, ScalarField>,
) -> ScalarField {
    if let Some(d) = memo.get(&f.ptr()) {
        return d.clone();
    }
    let r = match f.node() {
        Node::Const(_) => f.clone(),
        Node::Var(i) => {
            if *i == var {
                value.clone()
            } else {
                f.clone()
            }
        }
        Node::Neg(a) => -subst_rec(a, var, value, memo),
        Node::Add(a, b) => subst_rec(a, var, value, memo) + subst_rec(b, var, value, memo),
        Node::Sub(a, b) => subst_rec(a, var, value, memo) - subst_rec(b, var, value, memo),
        Node::Mul(a, b) => subst_rec(a, var, value, memo) * subst_rec(b, var, value, memo),
        Node::Div(a, b) => subst_rec(a, var, value, memo) / subst_rec(b, var, value, memo),
        Node::Pow(a, n) => subst_rec(a, var, value, memo).powi(*n),
        Node::Sin(a) => subst_rec(a, var, value, memo).sin(),
        Node::Cos(a) => subst_rec(a, var, value, memo).cos(),
        Node::Exp(a) => subst_rec(a, var, value, memo).exp(),
        Node::Sqrt(a) => subst_rec(a, var, value, memo).sqrt(),
    };
    memo.insert(f.ptr(), r.clone());
    r
}

// ---------------------------------------------------------------------------
// arithmetic with folding

fn fold_add(a: &ScalarField, b: &ScalarField) -> ScalarField {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarField::constant(x + y),
        (Some(0.0), _) => b.clone(),
        (_, Some(0.0)) => a.clone(),
        _ => ScalarField::from_node(Node::Add(a.clone(), b.clone())),
    }
}

fn fold_sub(a: &ScalarField, b: &ScalarField) -> ScalarField {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarField::constant(x - y),
        (_, Some(0.0)) => a.clone(),
        (Some(0.0), _) => fold_neg(b),
        _ => ScalarField::from_node(Node::Sub(a.clone(), b.clone())),
    }
}

fn fold_mul(a: &ScalarField, b: &ScalarField) -> ScalarField {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => ScalarField::constant(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => ScalarField::zero(),
        (Some(1.0), _) => b.clone(),
        (_, Some(1.0)) => a.clone(),
        (Some(-1.0), _) => fold_neg(b),
        (_, Some(-1.0)) => fold_neg(a),
        _ => ScalarField::from_node(Node::Mul(a.clone(), b.clone())),
    }
}

fn fold_div(a: &ScalarField, b: &ScalarField) -> ScalarField {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => ScalarField::constant(x / y),
        (Some(0.0), _) => ScalarField::zero(),
        (_, Some(1.0)) => a.clone(),
        _ => ScalarField::from_node(Node::Div(a.clone(), b.clone())),
    }
}

fn fold_neg(a: &ScalarField) -> ScalarField {
    match a.node() {
        Node::Const(c) => ScalarField::constant(-c),
        Node::Neg(inner) => inner.clone(),
        _ => ScalarField::from_node(Node::Neg(a.clone())),
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $fold:ident) => {
        impl $trait<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                $fold(self, rhs)
            }
        }
        impl $trait<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                $fold(&self, &rhs)
            }
        }
        impl $trait<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                $fold(&self, rhs)
            }
        }
        impl $trait<ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                $fold(self, &rhs)
            }
        }
        impl $trait<f64> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: f64) -> ScalarField {
                $fold(self, &ScalarField::constant(rhs))
            }
        }
        impl $trait<f64> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: f64) -> ScalarField {
                $fold(&self, &ScalarField::constant(rhs))
            }
        }
    };
}

binop!(Add, add, fold_add);
binop!(Sub, sub, fold_sub);
binop!(Mul, mul, fold_mul);
binop!(Div, div, fold_div);

impl Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        fold_neg(&self)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        fold_neg(self)
    }
}

impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        ScalarField::constant(c)
    }
}

// ---------------------------------------------------------------------------
// compiled evaluation

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Sqrt(usize),
}

/// Straight-line program for a batch of fields; shared subexpressions are
/// evaluated once per point.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    arity: usize,
}

impl Tape {
    pub fn compile<'a, I>(fields: I) -> Tape
    where
        I: IntoIterator<Item = &'a ScalarField>,
    {
        let mut ops = Vec::new();
        let mut index: HashMap<*const Node, usize> = HashMap::new();
        let mut outputs = Vec::new();
        for f in fields {
            outputs.push(emit(f, &mut ops, &mut index));
        }
        let arity = ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Tape {
            ops,
            outputs,
            arity,
        }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Evaluates every output at `point`, writing them into `out`.
    pub fn eval(&self, point: &[f64], out: &mut Vec<f64>) -> Result<(), EvalError> {
        if point.len() < self.arity {
            return Err(EvalError::PointDimension {
                expected: self.arity,
                got: point.len(),
            });
        }
        let mut regs: Vec<f64> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => point[i],
                Op::Neg(a) => -regs[a],
                Op::Add(a, b) => regs[a] + regs[b],
                Op::Sub(a, b) => regs[a] - regs[b],
                Op::Mul(a, b) => regs[a] * regs[b],
                Op::Div(a, b) => {
                    let d: f64 = regs[b];
                    if d == 0.0 {
                        return Err(EvalError::ZeroDenominator);
                    }
                    regs[a] / d
                }
                Op::Pow(a, n) => {
                    let base: f64 = regs[a];
                    if n < 0 && base == 0.0 {
                        return Err(EvalError::ZeroDenominator);
                    }
                    base.powi(n)
                }
                Op::Sin(a) => regs[a].sin(),
                Op::Cos(a) => regs[a].cos(),
                Op::Exp(a) => regs[a].exp(),
                Op::Sqrt(a) => {
                    let v: f64 = regs[a];
                    if v < 0.0 {
                        return Err(EvalError::Domain("square root of a negative value"));
                    }
                    v.sqrt()
                }
            };
            regs.push(v);
        }
        out.clear();
        out.extend(self.outputs.iter().map(|&i| regs[i]));
        Ok(())
    }
}

fn emit(f: &ScalarField, ops: &mut Vec<Op>, index: &mut HashMap<*const Node, usize>) -> usize {
    if let Some(&i) = index.get(&f.ptr()) {
        return i;
    }
    let op = match f.node() {
        Node::Const(c) => Op::Const(*c),
        Node::Var(i) => Op::Var(*i),
        Node::Neg(a) => Op::Neg(emit(a, ops, index)),
        Node::Add(a, b) => {
            let (a, b) = (emit(a, ops, index), emit(b, ops, index));
            Op::Add(a, b)
        }
        Node::Sub(a, b) => {
            let (a, b) = (emit(a, ops, index), emit(b, ops, index));
            Op::Sub(a, b)
        }
        Node::Mul(a, b) => {
            let (a, b) = (emit(a, ops, index), emit(b, ops, index));
            Op::Mul(a, b)
        }
        Node::Div(a, b) => {
            let (a, b) = (emit(a, ops, index), emit(b, ops, index));
            Op::Div(a, b)
        }
        Node::Pow(a, n) => Op::Pow(emit(a, ops, index), *n),
        Node::Sin(a) => Op::Sin(emit(a, ops, index)),
        Node::Cos(a) => Op::Cos(emit(a, ops, index)),
        Node::Exp(a) => Op::Exp(emit(a, ops, index)),
        Node::Sqrt(a) => Op::Sqrt(emit(a, ops, index)),
    };
    ops.push(op);
    let i = ops.len() - 1;
    index.insert(f.ptr(), i);
    i
}

// ---------------------------------------------------------------------------
// printing

pub struct FieldDisplay<'a> {
    field: &'a ScalarField,
    names: &'a [String],
}

// binding strength: sum 1, product 2, unary minus 3, power 4, atom 5
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Const(c) if *c < 0.0 => 3,
        Node::Pow(..) => 4,
        _ => 5,
    }
}

fn write_field(f: &ScalarField, names: &[String], out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let wrap = |child: &ScalarField, min: u8, out: &mut fmt::Formatter<'_>| -> fmt::Result {
        if precedence(child.node()) < min {
            write!(out, "(")?;
            write_field(child, names, out)?;
            write!(out, ")")
        } else {
            write_field(child, names, out)
        }
    };
    match f.node() {
        Node::Const(c) => write!(out, "{c}"),
        Node::Var(i) => match names.get(*i) {
            Some(n) => write!(out, "{n}"),
            None => write!(out, "x{i}"),
        },
        Node::Neg(a) => {
            write!(out, "-")?;
            wrap(a, 3, out)
        }
        Node::Add(a, b) => {
            wrap(a, 1, out)?;
            write!(out, " + ")?;
            wrap(b, 2, out)
        }
        Node::Sub(a, b) => {
            wrap(a, 1, out)?;
            write!(out, " - ")?;
            wrap(b, 2, out)
        }
        Node::Mul(a, b) => {
            wrap(a, 2, out)?;
            write!(out, "*")?;
            wrap(b, 4, out)
        }
        Node::Div(a, b) => {
            wrap(a, 2, out)?;
            write!(out, "/")?;
            wrap(b, 4, out)
        }
        Node::Pow(a, n) => {
            wrap(a, 5, out)?;
            write!(out, "^{n}")
        }
        Node::Sin(a) => {
            write!(out, "sin(")?;
            write_field(a, names, out)?;
            write!(out, ")")
        }
        Node::Cos(a) => {
            write!(out, "cos(")?;
            write_field(a, names, out)?;
            write!(out, ")")
        }
        Node::Exp(a) => {
            write!(out, "exp(")?;
            write_field(a, names, out)?;
            write!(out, ")")
        }
        Node::Sqrt(a) => {
            write!(out, "sqrt(")?;
            write_field(a, names, out)?;
            write!(out, ")")
        }
    }
}

impl fmt::Display for FieldDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_field(self.field, self.names, f)
    }
}

// ---------------------------------------------------------------------------
// parsing
//
//   expr   := term { ("+" | "-") term }
//   term   := factor { ("*" | "/") factor }
//   factor := atom [ "^" integer ] | "-" factor
//   atom   := number | ident | "(" expr ")" | ("sin"|"cos"|"exp") "(" expr ")"

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Token::Plus,
            '-' => Token::Minus,
            '*' => Token::Star,
            '/' => Token::Slash,
            '^' => Token::Caret,
            '(' => Token::LParen,
            ')' => Token::RParen,
            _ if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lexeme = &text[start..i];
                let value = lexeme.parse::<f64>().map_err(|_| ParseError::Syntax {
                    position: start,
                    message: format!("malformed number `{lexeme}`"),
                })?;
                tokens.push((start, Token::Num(value)));
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push((start, Token::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        tokens.push((start, tok));
        i += 1;
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    coords: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.end)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<ScalarField, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = ScalarField::from_node(Node::Add(acc, rhs));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = ScalarField::from_node(Node::Sub(acc, rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarField, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = ScalarField::from_node(Node::Mul(acc, rhs));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = ScalarField::from_node(Node::Div(acc, rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<ScalarField, ParseError> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(ScalarField::from_node(Node::Neg(inner)));
        }
        let base = self.atom()?;
        if self.peek() == Some(&Token::Caret) {
            self.pos += 1;
            let negative = if self.peek() == Some(&Token::Minus) {
                self.pos += 1;
                true
            } else {
                false
            };
            let position = self.offset();
            match self.peek() {
                Some(Token::Num(n)) if n.fract() == 0.0 && n.abs() <= i32::MAX as f64 => {
                    let n = *n as i32;
                    self.pos += 1;
                    let n = if negative { -n } else { n };
                    return Ok(ScalarField::from_node(Node::Pow(base, n)));
                }
                _ => {
                    return Err(ParseError::Syntax {
                        position,
                        message: "exponent must be an integer literal".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ScalarField, ParseError> {
        let position = self.offset();
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(ScalarField::constant(v))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if matches!(name.as_str(), "sin" | "cos" | "exp")
                    && self.peek() == Some(&Token::LParen)
                {
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    let node = match name.as_str() {
                        "sin" => Node::Sin(arg),
                        "cos" => Node::Cos(arg),
                        _ => Node::Exp(arg),
                    };
                    return Ok(ScalarField::from_node(node));
                }
                match self.coords.iter().position(|c| *c == name) {
                    Some(i) => Ok(ScalarField::var(i)),
                    None => Err(ParseError::UnknownIdentifier { name, position }),
                }
            }
            Some(_) => self.syntax("expected a number, coordinate, function or `(`"),
            None => self.syntax("unexpected end of expression"),
        }
    }
}

/// Parses `text` against the coordinate names of a base chart.
///
/// The returned tree mirrors the input literally (no folding), so a division
/// by an expression that vanishes somewhere still reports the zero
/// denominator when evaluated there.
pub fn parse_expression(text: &str, coords: &[String]) -> Result<ScalarField, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        coords,
    };
    let f = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return parser.syntax("unexpected trailing input");
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn parses_zero() {
        let f = parse_expression("0", &xy()).unwrap();
        assert_eq!(f.eval(&[0.3, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn evaluates_polynomial() {
        let f = parse_expression("x^2*y", &xy()).unwrap();
        assert_eq!(f.eval(&[2.0, 3.0]).unwrap(), 12.0);
    }

    #[test]
    fn unknown_identifier_is_reported() {
        let err = parse_expression("sin(x)+q", &xy()).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "q".into(),
                position: 7
            }
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_expression("x + * y", &xy()) {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_expression("(x + y", &xy()),
            Err(ParseError::Syntax { position: 6, .. })
        ));
        assert!(parse_expression("x^1.5", &xy()).is_err());
        assert!(parse_expression("x y", &xy()).is_err());
    }

    #[test]
    fn division_by_zero_is_an_evaluation_error() {
        let f = parse_expression("1/x", &xy()).unwrap();
        assert_eq!(f.eval(&[0.0, 1.0]), Err(EvalError::ZeroDenominator));
        assert_eq!(f.eval(&[2.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn unary_minus_and_precedence() {
        let f = parse_expression("-x^2 + 2*-y - (x - y)/2", &xy()).unwrap();
        let (x, y) = (1.5, -0.25);
        let want = -(x * x) + 2.0 * -y - (x - y) / 2.0;
        assert!((f.eval(&[x, y]).unwrap() - want).abs() < 1e-15);
        let g = parse_expression("exp(-x)*cos(y) + sin(x)^-2", &xy()).unwrap();
        let want = (-x).exp() * y.cos() + x.sin().powi(-2);
        assert!((g.eval(&[x, y]).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn derivative_examples() {
        let f = parse_expression("x^2*y", &xy()).unwrap();
        assert_eq!(f.derivative(0).eval(&[2.0, 3.0]).unwrap(), 12.0);
        assert!(ScalarField::constant(4.2).derivative(0).is_zero());
        let s = parse_expression("sin(x)", &xy()).unwrap();
        assert_eq!(s.derivative(0).eval(&[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn derivative_of_quotient_and_sqrt() {
        let coords = xy();
        let f = parse_expression("(x + y^3)/(2 + cos(x*y))", &coords).unwrap();
        let p = [0.7, -0.4];
        let h = 1e-6;
        let fd =
            (f.eval(&[p[0] + h, p[1]]).unwrap() - f.eval(&[p[0] - h, p[1]]).unwrap()) / (2.0 * h);
        assert!((f.derivative(0).eval(&p).unwrap() - fd).abs() < 1e-8);
        let r = (ScalarField::var(0).powi(2) + 1.0).sqrt();
        let dr = r.derivative(0).eval(&[0.5, 0.0]).unwrap();
        assert!((dr - 0.5 / (1.25f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn folding_keeps_zero_structural() {
        let x = ScalarField::var(0);
        assert!((&x * 0.0).is_zero());
        assert!((ScalarField::zero() * &x + ScalarField::zero()).is_zero());
        assert!(x.derivative(1).is_zero());
        let one = &x / 1.0;
        assert!(matches!(one.node(), Node::Var(0)));
        assert!(matches!((-(-&x)).node(), Node::Var(0)));
    }

    #[test]
    fn substitution_replaces_coordinate() {
        let f = parse_expression("x*y + y^2", &xy()).unwrap();
        let g = f.substitute(1, &ScalarField::constant(2.0));
        assert_eq!(g.eval(&[3.0]).unwrap(), 10.0);
        assert_eq!(g.max_var(), Some(0));
    }

    #[test]
    fn display_round_trips_through_parser() {
        let coords = xy();
        for src in [
            "x - (y - x)",
            "-(x + y)*y^3",
            "x/(y*2)",
            "exp(x - y)^2 - -3",
        ] {
            let f = parse_expression(src, &coords).unwrap();
            let printed = f.display(&coords).to_string();
            let g = parse_expression(&printed, &coords).unwrap();
            for p in [[0.3, 0.9], [-1.1, 0.25]] {
                let (a, b) = (f.eval(&p).unwrap(), g.eval(&p).unwrap());
                assert!((a - b).abs() < 1e-14, "{src} -> {printed}");
            }
        }
    }

    #[test]
    fn tape_shares_subexpressions() {
        let x = ScalarField::var(0);
        let mut f = x.clone();
        for _ in 0..40 {
            f = &f * &f + &f;
        }
        // the unshared tree would have ~2^40 nodes
        let tape = Tape::compile([&f]);
        assert!(tape.ops.len() < 200);
        let mut out = Vec::new();
        tape.eval(&[0.0], &mut out).unwrap();
        assert_eq!(out[0], 0.0);
        let df = f.derivative(0);
        let t2 = Tape::compile([&df]);
        assert!(t2.ops.len() < 1000);
    }
}
