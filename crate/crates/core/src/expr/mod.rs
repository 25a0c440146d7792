//! Scalar field expressions over a chart.
//!
//! An expression is parsed against a list of coordinate names (plus optional
//! named parameters and the distinguished fiber variable `p` used by Lax
//! functions) into a small AST, and can then be evaluated either to an `f64`
//! or to a [`Jet`](crate::jet::Jet) of any order. Parsing and printing are
//! mutually inverse on the AST: `parse(print(e)) == e`.
//!
//! Grammar (standard precedence, `^` > unary `-` > `*` `/` > `+` `-`;
//! binary `+ - * /` associate to the left):
//!
//! ```text
//! expr   := term  (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' exponent)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! The exponent of `^` must be a rational constant: an optionally negated
//! integer, decimal with a small exact denominator, or quotient `a/b` of
//! integers, possibly parenthesized. Chained `a^b^c` is rejected with a parse
//! error rather than silently associated.

mod eval;
mod lexer;
mod parser;
mod printer;

pub use eval::JetEnv;

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Reduced rational exponent with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Rational {
        assert!(den != 0, "rational denominator must be nonzero");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        Rational {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn integer(n: i64) -> Rational {
        Rational { num: n, den: 1 }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b.max(1);
    }
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Elementary functions available in expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Exp => "exp",
            UnaryFn::Ln => "ln",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<UnaryFn> {
        match name {
            "exp" => Some(UnaryFn::Exp),
            "ln" => Some(UnaryFn::Ln),
            "sqrt" => Some(UnaryFn::Sqrt),
            "sin" => Some(UnaryFn::Sin),
            "cos" => Some(UnaryFn::Cos),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression AST node. `Coord` refers to a chart coordinate by index;
/// `Param` is a named constant supplied at evaluation time; `LaxVar` is the
/// distinguished fiber variable `p` of Lax functions.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Coord(usize),
    Param(String),
    LaxVar,
    Neg(Box<Node>),
    Unary(UnaryFn, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, Rational),
}

/// Name environment for parsing: coordinate names, parameter names, and
/// whether the fiber variable `p` is in scope.
#[derive(Debug, Clone, Default)]
pub struct ExprContext {
    pub coords: Vec<String>,
    pub params: Vec<String>,
    pub allow_lax_var: bool,
}

impl ExprContext {
    pub fn chart(coords: &[String]) -> ExprContext {
        ExprContext {
            coords: coords.to_vec(),
            params: Vec::new(),
            allow_lax_var: false,
        }
    }

    pub fn chart_with_lax(coords: &[String]) -> ExprContext {
        ExprContext {
            coords: coords.to_vec(),
            params: Vec::new(),
            allow_lax_var: true,
        }
    }
}

/// A parsed scalar field. Stores the AST together with its canonical printed
/// form, which is used both for serialization and for error messages.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr {
    root: Node,
    text: String,
}

impl FieldExpr {
    /// Parse `src` against the given name environment.
    pub fn parse(src: &str, ctx: &ExprContext) -> Result<FieldExpr> {
        let root = parser::parse(src, ctx)?;
        Ok(FieldExpr::from_node_named(root, &ctx.coords))
    }

    /// Wrap an already-built AST, computing its canonical text with the given
    /// coordinate display names.
    pub fn from_node_named(root: Node, coord_names: &[String]) -> FieldExpr {
        let root = printer::normalize(root);
        let text = printer::print(&root, coord_names);
        FieldExpr { root, text }
    }

    /// Wrap an already-built AST that contains no coordinate references.
    pub fn from_node(root: Node) -> FieldExpr {
        FieldExpr::from_node_named(root, &[])
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    /// Canonical source text (parses back to the same AST).
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Evaluate to a plain number.
    pub fn eval_f64(
        &self,
        coords: &[f64],
        lax: Option<f64>,
        params: &HashMap<String, f64>,
    ) -> Result<f64> {
        eval::eval_f64(&self.root, coords, lax, params)
    }

    /// Evaluate to a jet under an explicit symbol-to-jet assignment.
    pub fn eval_jet(&self, env: &JetEnv) -> Result<crate::jet::Jet> {
        eval::eval_jet(&self.root, env)
    }

    /// Constant expression.
    pub fn constant(v: f64) -> FieldExpr {
        FieldExpr::from_node(Node::Const(v))
    }
}

impl std::fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text)
    }
}

/// Report an unknown identifier with its source position.
fn unknown_identifier(name: &str, line: usize, column: usize) -> Error {
    Error::UnknownIdentifier {
        name: name.to_string(),
        line,
        column,
    }
}

#[cfg(test)]
mod tests;
