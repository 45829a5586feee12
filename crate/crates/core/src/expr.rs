//! Scene expression language: parsing, printing, differentiation and jet evaluation.
//!
//! Grammar (usual precedence, left associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' integer)*
//! primary := number | name | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-t^2` is `-(t^2)`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, JetError, Result};
use crate::jet::{rational_to_f64, Jet};

/// Largest jet order accepted by [`eval_jet`].
pub const MAX_ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Exact value; `decimal` records that it was written with a decimal point.
    Const { value: BigRational, decimal: bool },
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    Func(Func, Box<Node>),
}

/// A parsed expression together with its declared variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    node: Node,
    vars: Vec<String>,
}

pub fn parse_expression(text: &str, vars: &[&str]) -> Result<Expr> {
    Expr::parse(text, vars)
}

impl Expr {
    pub fn parse(text: &str, vars: &[&str]) -> Result<Expr> {
        let mut p = Parser {
            src: text,
            bytes: text.as_bytes(),
            pos: 0,
            vars,
        };
        p.skip_ws();
        if p.pos >= p.bytes.len() {
            return Err(p.error("empty expression"));
        }
        let node = p.expr()?;
        p.skip_ws();
        if p.pos < p.bytes.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            node,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn from_node(node: Node, vars: Vec<String>) -> Expr {
        Expr { node, vars }
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn constant(value: i64, vars: Vec<String>) -> Expr {
        Expr {
            node: int(value),
            vars,
        }
    }

    /// True when variable `var` occurs in the expression.
    pub fn uses(&self, var: usize) -> bool {
        fn walk(n: &Node, v: usize) -> bool {
            match n {
                Node::Const { .. } => false,
                Node::Var(i) => *i == v,
                Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => walk(a, v),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, v) || walk(b, v)
                }
            }
        }
        walk(&self.node, var)
    }

    /// True when no elementary function occurs.
    pub fn is_rational_function(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Const { .. } | Node::Var(_) => true,
                Node::Func(..) => false,
                Node::Neg(a) | Node::Pow(a, _) => walk(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a) && walk(b)
                }
            }
        }
        walk(&self.node)
    }

    /// Symbolic partial derivative with light simplification.
    pub fn diff(&self, var: usize) -> Expr {
        Expr {
            node: diff_node(&self.node, var),
            vars: self.vars.clone(),
        }
    }

    /// Prefix (Polish) notation on one line, for debugging dumps.
    pub fn to_prefix(&self) -> String {
        let mut out = String::new();
        self.prefix_into(&self.node, &mut out);
        out
    }

    fn prefix_into(&self, n: &Node, out: &mut String) {
        if !out.is_empty() {
            out.push(' ');
        }
        match n {
            Node::Const { value, decimal } => out.push_str(&format_const(value, *decimal)),
            Node::Var(i) => out.push_str(&self.vars[*i]),
            Node::Neg(a) => {
                out.push_str("neg");
                self.prefix_into(a, out);
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                out.push(match n {
                    Node::Add(..) => '+',
                    Node::Sub(..) => '-',
                    Node::Mul(..) => '*',
                    _ => '/',
                });
                self.prefix_into(a, out);
                self.prefix_into(b, out);
            }
            Node::Pow(a, k) => {
                out.push('^');
                self.prefix_into(a, out);
                out.push_str(&format!(" {k}"));
            }
            Node::Func(f, a) => {
                out.push_str(f.name());
                self.prefix_into(a, out);
            }
        }
    }

    /// Evaluates over any [`Domain`]; `template` fixes the shape of constants.
    pub fn eval<D: Domain>(&self, vars: &[D], template: &D) -> Result<D> {
        if vars.len() != self.vars.len() {
            return Err(Error::Dimension(format!(
                "expression has {} variables, {} values supplied",
                self.vars.len(),
                vars.len()
            )));
        }
        eval_node(&self.node, vars, template)
    }

    pub fn eval_f64(&self, p: &[f64]) -> Result<f64> {
        self.eval(p, &0.0)
    }
}

/// Jet of `e` at `p` to order `k`: coefficient `α` is `∂^α e(p) / α!`.
pub fn eval_jet(e: &Expr, p: &[f64], k: usize) -> Result<Jet<f64>> {
    check_order(k)?;
    let m = e.vars.len();
    if p.len() != m {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, expression has {} variables",
            p.len(),
            m
        )));
    }
    let vars: Vec<Jet<f64>> = (0..m).map(|i| Jet::variable(m, k, i, p[i])).collect();
    e.eval(&vars, &Jet::zero(m, k))
}

/// Exact jet of a rational expression at a rational point.
pub fn eval_jet_rational(e: &Expr, p: &[BigRational], k: usize) -> Result<Jet<BigRational>> {
    check_order(k)?;
    let m = e.vars.len();
    if p.len() != m {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, expression has {} variables",
            p.len(),
            m
        )));
    }
    let vars: Vec<Jet<BigRational>> = (0..m)
        .map(|i| Jet::variable(m, k, i, p[i].clone()))
        .collect();
    e.eval(&vars, &Jet::zero(m, k))
}

fn check_order(k: usize) -> Result<()> {
    if k > MAX_ORDER {
        return Err(JetError::Order {
            requested: k,
            max: MAX_ORDER,
        }
        .into());
    }
    Ok(())
}

/// Values an expression can be evaluated in.
pub trait Domain: Sized + Clone {
    fn constant(template: &Self, value: &BigRational) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Result<Self>;
    fn neg(&self) -> Self;
    fn powi(&self, k: u32) -> Self;
    fn func(&self, f: Func) -> Result<Self>;
}

impl Domain for f64 {
    fn constant(_: &Self, value: &BigRational) -> Self {
        rational_to_f64(value)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Result<Self> {
        if *o == 0.0 {
            return Err(JetError::Domain("division by zero".into()).into());
        }
        Ok(self / o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powi(&self, k: u32) -> Self {
        f64::powi(*self, k as i32)
    }
    fn func(&self, f: Func) -> Result<Self> {
        let x = *self;
        Ok(match f {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log | Func::Sqrt if x.is_nan() || x <= 0.0 => {
                return Err(JetError::Domain(format!("{} of non-positive value {x}", f.name())).into())
            }
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
        })
    }
}

impl Domain for Jet<f64> {
    fn constant(template: &Self, value: &BigRational) -> Self {
        Jet::constant(template.vars(), template.order(), rational_to_f64(value))
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Result<Self> {
        Ok(self.checked_div(o)?)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powi(&self, k: u32) -> Self {
        Jet::powi(self, k)
    }
    fn func(&self, f: Func) -> Result<Self> {
        Ok(match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Exp => self.exp(),
            Func::Log => self.ln()?,
            Func::Sqrt => self.sqrt()?,
        })
    }
}

impl Domain for Jet<BigRational> {
    fn constant(template: &Self, value: &BigRational) -> Self {
        Jet::constant(template.vars(), template.order(), value.clone())
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Result<Self> {
        Ok(self.checked_div(o)?)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powi(&self, k: u32) -> Self {
        Jet::powi(self, k)
    }
    fn func(&self, f: Func) -> Result<Self> {
        Err(JetError::NotPolynomial(format!("{} has no exact evaluation", f.name())).into())
    }
}

fn eval_node<D: Domain>(n: &Node, vars: &[D], t: &D) -> Result<D> {
    Ok(match n {
        Node::Const { value, .. } => D::constant(t, value),
        Node::Var(i) => vars[*i].clone(),
        Node::Neg(a) => eval_node(a, vars, t)?.neg(),
        Node::Add(a, b) => eval_node(a, vars, t)?.add(&eval_node(b, vars, t)?),
        Node::Sub(a, b) => eval_node(a, vars, t)?.sub(&eval_node(b, vars, t)?),
        Node::Mul(a, b) => eval_node(a, vars, t)?.mul(&eval_node(b, vars, t)?),
        Node::Div(a, b) => eval_node(a, vars, t)?.div(&eval_node(b, vars, t)?)?,
        Node::Pow(a, k) => eval_node(a, vars, t)?.powi(*k),
        Node::Func(f, a) => eval_node(a, vars, t)?.func(*f)?,
    })
}

fn int(v: i64) -> Node {
    Node::Const {
        value: BigRational::from_integer(BigInt::from(v)),
        decimal: false,
    }
}

fn const_of(n: &Node) -> Option<&BigRational> {
    match n {
        Node::Const { value, .. } => Some(value),
        _ => None,
    }
}

fn is_const(n: &Node, v: i64) -> bool {
    const_of(n).is_some_and(|c| *c == BigRational::from_integer(BigInt::from(v)))
}

fn rat(value: BigRational) -> Node {
    Node::Const {
        value,
        decimal: false,
    }
}

fn s_neg(a: Node) -> Node {
    match a {
        Node::Const { value, .. } => rat(-value),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn s_add(a: Node, b: Node) -> Node {
    match (const_of(&a), const_of(&b)) {
        (Some(x), Some(y)) => rat(x + y),
        _ if is_const(&a, 0) => b,
        _ if is_const(&b, 0) => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn s_sub(a: Node, b: Node) -> Node {
    match (const_of(&a), const_of(&b)) {
        (Some(x), Some(y)) => rat(x - y),
        _ if is_const(&b, 0) => a,
        _ if is_const(&a, 0) => s_neg(b),
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn s_mul(a: Node, b: Node) -> Node {
    match (const_of(&a), const_of(&b)) {
        (Some(x), Some(y)) => rat(x * y),
        _ if is_const(&a, 0) || is_const(&b, 0) => int(0),
        _ if is_const(&a, 1) => b,
        _ if is_const(&b, 1) => a,
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn s_div(a: Node, b: Node) -> Node {
    match (const_of(&a), const_of(&b)) {
        (Some(x), Some(y)) if !y.is_zero() => rat(x / y),
        _ if is_const(&a, 0) => int(0),
        _ if is_const(&b, 1) => a,
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn s_pow(a: Node, k: u32) -> Node {
    match k {
        0 => int(1),
        1 => a,
        _ => match const_of(&a) {
            Some(c) => rat(num_traits::pow(c.clone(), k as usize)),
            None => Node::Pow(Box::new(a), k),
        },
    }
}

fn diff_node(n: &Node, v: usize) -> Node {
    match n {
        Node::Const { .. } => int(0),
        Node::Var(i) => int(if *i == v { 1 } else { 0 }),
        Node::Neg(a) => s_neg(diff_node(a, v)),
        Node::Add(a, b) => s_add(diff_node(a, v), diff_node(b, v)),
        Node::Sub(a, b) => s_sub(diff_node(a, v), diff_node(b, v)),
        Node::Mul(a, b) => s_add(
            s_mul(diff_node(a, v), (**b).clone()),
            s_mul((**a).clone(), diff_node(b, v)),
        ),
        Node::Div(a, b) => {
            let da = diff_node(a, v);
            let db = diff_node(b, v);
            s_sub(
                s_div(da, (**b).clone()),
                s_div(s_mul((**a).clone(), db), s_pow((**b).clone(), 2)),
            )
        }
        Node::Pow(a, k) => s_mul(
            s_mul(int(*k as i64), s_pow((**a).clone(), k - 1)),
            diff_node(a, v),
        ),
        Node::Func(f, a) => {
            let da = diff_node(a, v);
            if is_const(&da, 0) {
                return int(0);
            }
            let a = (**a).clone();
            match f {
                Func::Sin => s_mul(Node::Func(Func::Cos, Box::new(a)), da),
                Func::Cos => s_neg(s_mul(Node::Func(Func::Sin, Box::new(a)), da)),
                Func::Exp => s_mul(Node::Func(Func::Exp, Box::new(a)), da),
                Func::Log => s_div(da, a),
                Func::Sqrt => s_div(da, s_mul(int(2), Node::Func(Func::Sqrt, Box::new(a)))),
            }
        }
    }
}

fn format_const(value: &BigRational, decimal: bool) -> String {
    if value.is_integer() && !decimal {
        return value.numer().to_string();
    }
    if let Some(s) = terminating_decimal(value) {
        return s;
    }
    format!("{}/{}", value.numer(), value.denom())
}

/// Exact decimal expansion when the denominator has only factors 2 and 5.
fn terminating_decimal(value: &BigRational) -> Option<String> {
    let mut d = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut a, mut b) = (0u32, 0u32);
    while (&d % &two).is_zero() {
        d /= &two;
        a += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        b += 1;
    }
    if !d.is_one() {
        return None;
    }
    let digits = a.max(b).max(1);
    let scaled = value * BigRational::from_integer(num_traits::pow(BigInt::from(10), digits as usize));
    let n = scaled.to_integer();
    let neg = n.is_negative();
    let s = n.abs().to_string();
    let s = format!("{:0>width$}", s, width = digits as usize + 1);
    let (int_part, frac) = s.split_at(s.len() - digits as usize);
    Some(format!("{}{}.{}", if neg { "-" } else { "" }, int_part, frac))
}

fn level(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        Node::Const { value, .. } if value.is_negative() => 0,
        _ => 5,
    }
}

impl Expr {
    fn write_node(&self, n: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, c: &Node, paren: bool| -> fmt::Result {
            if paren {
                write!(f, "(")?;
                self.write_node(c, f)?;
                write!(f, ")")
            } else {
                self.write_node(c, f)
            }
        };
        match n {
            Node::Const { value, decimal } => write!(f, "{}", format_const(value, *decimal)),
            Node::Var(i) => write!(f, "{}", self.vars[*i]),
            Node::Neg(a) => {
                write!(f, "-")?;
                child(f, a, level(a) < 3)
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                let (op, p) = match n {
                    Node::Add(..) => ("+", 1),
                    Node::Sub(..) => ("-", 1),
                    Node::Mul(..) => ("*", 2),
                    _ => ("/", 2),
                };
                child(f, a, level(a) < p)?;
                write!(f, "{op}")?;
                child(f, b, level(b) <= p)
            }
            Node::Pow(a, k) => {
                child(f, a, level(a) < 4)?;
                write!(f, "^{k}")
            }
            Node::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write_node(a, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_node(&self.node, f)
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let mut base = self.primary()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("exponent must be a non-negative integer literal"));
            }
            if self.bytes.get(self.pos) == Some(&b'.') {
                return Err(self.error("exponent must be a non-negative integer literal"));
            }
            let k: u32 = self.src[start..self.pos].parse().map_err(|_| Error::Syntax {
                offset: start,
                message: "exponent out of range".into(),
            })?;
            base = Node::Pow(Box::new(base), k);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let mut decimal = false;
        if self.bytes.get(self.pos) == Some(&b'.') {
            decimal = true;
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        let mantissa = &self.src[start..self.pos];
        if mantissa == "." {
            return Err(Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        let mut exponent: i64 = 0;
        if matches!(self.bytes.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            if let Some(s @ (b'+' | b'-')) = self.bytes.get(self.pos).copied() {
                sign = if s == b'-' { -1 } else { 1 };
                self.pos += 1;
            }
            let es = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if es == self.pos {
                self.pos = save;
                return Err(self.error("malformed exponent"));
            }
            exponent = sign
                * self.src[es..self.pos].parse::<i64>().map_err(|_| Error::Syntax {
                    offset: es,
                    message: "exponent out of range".into(),
                })?;
            if exponent.abs() > 400 {
                return Err(Error::Syntax {
                    offset: es,
                    message: "exponent out of range".into(),
                });
            }
            decimal = true;
        }
        let (int_part, frac_part) = match mantissa.split_once('.') {
            Some((a, b)) => (a, b),
            None => (mantissa, ""),
        };
        let digits = format!("{int_part}{frac_part}");
        let numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits })
            .map_err(|_| Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            })?;
        let scale = exponent - frac_part.len() as i64;
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Node::Const { value, decimal })
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if let Some(i) = self.vars.iter().position(|v| *v == name) {
            return Ok(Node::Var(i));
        }
        if let Some(func) = Func::from_name(name) {
            if self.peek() != Some(b'(') {
                return Err(self.error("expected `(` after function name"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.error("expected `)`"));
            }
            self.pos += 1;
            return Ok(Node::Func(func, Box::new(arg)));
        }
        Err(Error::UnknownVariable {
            name: name.to_string(),
            offset: start,
        })
    }
}

/// Integer value of a constant node, if it is one.
pub fn node_as_f64(n: &Node) -> Option<f64> {
    const_of(n).and_then(|c| c.to_f64())
}
