//! Univariate coefficient expressions.
//!
//! Drift and diffusion coefficients are given as text such as `1-x` or
//! `2+sin(x)`. This module parses them into an [`Expr`] tree that can be
//! evaluated, rendered back to text, and differentiated symbolically (the
//! Milstein correction needs `b'(x)`).
//!
//! Grammar, lowest to highest precedence:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-"? power
//! power  := atom ("^" power)?
//! atom   := number | "x" | "pi" | "e" | func "(" expr ")" | "(" expr ")"
//! ```
//!
//! Exponents must be constant sub-expressions.

mod diff;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use parse::{parse, ParseError};

/// Elementary functions of one argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
}

impl UnaryOp {
    pub(crate) const FUNCTIONS: [UnaryOp; 9] = [
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tan,
        UnaryOp::Atan,
        UnaryOp::Exp,
        UnaryOp::Ln,
        UnaryOp::Sqrt,
        UnaryOp::Abs,
        UnaryOp::Tanh,
    ];

    /// Name used in source text; `-` for negation.
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Atan => "atan",
            UnaryOp::Exp => "exp",
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Tanh => "tanh",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Self::FUNCTIONS.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, v: f64) -> Option<f64> {
        let out = match self {
            UnaryOp::Neg => -v,
            UnaryOp::Sin => v.sin(),
            UnaryOp::Cos => v.cos(),
            UnaryOp::Tan => v.tan(),
            UnaryOp::Atan => v.atan(),
            UnaryOp::Exp => v.exp(),
            UnaryOp::Ln if v <= 0.0 => return None,
            UnaryOp::Ln => v.ln(),
            UnaryOp::Sqrt if v < 0.0 => return None,
            UnaryOp::Sqrt => v.sqrt(),
            UnaryOp::Abs => v.abs(),
            UnaryOp::Tanh => v.tanh(),
        };
        out.is_finite().then_some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    fn apply(self, l: f64, r: f64) -> Option<f64> {
        let out = match self {
            BinaryOp::Add => l + r,
            BinaryOp::Sub => l - r,
            BinaryOp::Mul => l * r,
            BinaryOp::Div if r == 0.0 => return None,
            BinaryOp::Div => l / r,
            BinaryOp::Pow => pow(l, r),
        };
        out.is_finite().then_some(out)
    }
}

fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

/// Expression tree over the single variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Evaluation left the real domain, e.g. `ln(0)`, `1/0`, or an overflow.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error evaluating `{node}` at x = {x}")]
pub struct DomainError {
    /// The innermost sub-expression whose value is undefined or non-finite.
    pub node: Expr,
    pub x: f64,
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Self {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Self {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    /// Value at `x`. Any non-finite intermediate result is reported as a
    /// [`DomainError`] naming the offending node.
    pub fn evaluate(&self, x: f64) -> Result<f64, DomainError> {
        self.eval_inner(x).ok_or_else(|| self.locate_failure(x))
    }

    #[inline]
    fn eval_inner(&self, x: f64) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Var => x.is_finite().then_some(x),
            Expr::Unary(op, child) => op.apply(child.eval_inner(x)?),
            Expr::Binary(op, l, r) => op.apply(l.eval_inner(x)?, r.eval_inner(x)?),
        }
    }

    // Slow path: only walked once evaluation has already failed.
    fn locate_failure(&self, x: f64) -> DomainError {
        let children: Vec<&Expr> = match self {
            Expr::Unary(_, c) => vec![c],
            Expr::Binary(_, l, r) => vec![l, r],
            _ => vec![],
        };
        for child in children {
            if child.eval_inner(x).is_none() {
                return child.locate_failure(x);
            }
        }
        DomainError { node: self.clone(), x }
    }

    /// True when the variable `x` does not occur.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var => false,
            Expr::Unary(_, c) => c.is_constant(),
            Expr::Binary(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    /// True when `abs` occurs anywhere in the tree.
    pub fn contains_abs(&self) -> bool {
        match self {
            Expr::Unary(UnaryOp::Abs, _) => true,
            Expr::Unary(_, c) => c.contains_abs(),
            Expr::Binary(_, l, r) => l.contains_abs() || r.contains_abs(),
            _ => false,
        }
    }

    /// Symbolic derivative with respect to `x`, constant-folded.
    pub fn differentiate(&self) -> Expr {
        diff::simplify(diff::derivative(self))
    }

    /// Best-effort constant folding and identity removal.
    pub fn simplify(&self) -> Expr {
        diff::simplify(self.clone())
    }
}

/// Renders fully parenthesized text that parses back to an expression with
/// identical values. Constants use the shortest round-trip decimal form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if c.is_sign_negative() => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var => f.write_str("x"),
            Expr::Unary(UnaryOp::Neg, c) => write!(f, "(-{c})"),
            Expr::Unary(op, c) => write!(f, "{}({c})", op.name()),
            Expr::Binary(op, l, r) => write!(f, "({l}{}{r})", op.symbol()),
        }
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}
