//! Recursive-descent parser for the expression grammar in the module docs.

use super::lexer::{tokenize, Token, TokenKind};
use super::{unknown_identifier, BinOp, ExprContext, Node, Rational, UnaryFn};
use crate::error::{Error, Result};

pub fn parse(src: &str, ctx: &ExprContext) -> Result<Node> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        ctx,
    };
    let node = parser.expr()?;
    parser.expect_eof()?;
    Ok(node)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    ctx: &'a ExprContext,
}

impl<'a> Parser<'a> {
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

    fn error_here(&self, message: impl Into<String>) -> Error {
        let t = self.peek();
        Error::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect_eof(&self) -> Result<()> {
        if self.peek().kind == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error_here(format!("unexpected token {}", describe(&self.peek().kind))))
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<()> {
        if self.peek().kind == kind {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!(
                "expected {what}, found {}",
                describe(&self.peek().kind)
            )))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek().kind == TokenKind::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek().kind != TokenKind::Caret {
            return Ok(base);
        }
        self.bump();
        let exponent = self.rational_exponent()?;
        if self.peek().kind == TokenKind::Caret {
            return Err(self.error_here(
                "chained `^` is ambiguous; parenthesize the exponent (which must be a rational constant)",
            ));
        }
        Ok(Node::Pow(Box::new(base), exponent))
    }

    /// Exponent of `^`: `[-] (number | '(' exponent ')')`, where a fraction
    /// `a/b` is only recognized inside parentheses — a bare `x^3/2` keeps the
    /// standard precedence reading `(x^3)/2`.
    fn rational_exponent(&mut self) -> Result<Rational> {
        if self.peek().kind == TokenKind::Minus {
            self.bump();
            let r = self.rational_exponent()?;
            return Ok(Rational::new(-r.num, r.den));
        }
        match self.peek().kind.clone() {
            TokenKind::Number(v) => {
                self.bump();
                rational_from_f64(v).ok_or_else(|| {
                    self.error_here(format!(
                        "exponent {v} is not an exact small rational; write it as a fraction `(a/b)`"
                    ))
                })
            }
            TokenKind::LParen => {
                self.bump();
                let mut r = self.rational_exponent()?;
                if self.peek().kind == TokenKind::Slash {
                    if r.den != 1 {
                        return Err(
                            self.error_here("fraction exponent must have integer numerator")
                        );
                    }
                    self.bump();
                    let denom = self.rational_exponent()?;
                    if denom.den != 1 || denom.num == 0 {
                        return Err(self.error_here(
                            "fraction exponent must have a nonzero integer denominator",
                        ));
                    }
                    r = Rational::new(r.num, denom.num);
                }
                self.expect(TokenKind::RParen, "`)` closing the exponent")?;
                Ok(r)
            }
            _ => Err(self.error_here(format!(
                "exponent must be a rational constant, found {}",
                describe(&self.peek().kind)
            ))),
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().kind.clone() {
            TokenKind::Number(v) => {
                self.bump();
                Ok(Node::Const(v))
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                let tok = self.bump();
                if let Some(f) = UnaryFn::from_name(&name) {
                    if self.peek().kind == TokenKind::LParen {
                        self.bump();
                        let arg = self.expr()?;
                        self.expect(TokenKind::RParen, "`)` closing the function argument")?;
                        return Ok(Node::Unary(f, Box::new(arg)));
                    }
                    // A function name not followed by `(` may still be a
                    // coordinate or parameter; fall through to name lookup.
                }
                self.resolve_name(&name, tok.line, tok.column)
            }
            _ => Err(self.error_here(format!(
                "expected a number, name or `(`, found {}",
                describe(&self.peek().kind)
            ))),
        }
    }

    fn resolve_name(&self, name: &str, line: usize, column: usize) -> Result<Node> {
        if self.ctx.allow_lax_var && name == "p" {
            return Ok(Node::LaxVar);
        }
        if let Some(i) = self.ctx.coords.iter().position(|c| c == name) {
            return Ok(Node::Coord(i));
        }
        if self.ctx.params.iter().any(|p| p == name) {
            return Ok(Node::Param(name.to_string()));
        }
        Err(unknown_identifier(name, line, column))
    }
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Number(v) => format!("number `{v}`"),
        TokenKind::Ident(s) => format!("name `{s}`"),
        TokenKind::Plus => "`+`".into(),
        TokenKind::Minus => "`-`".into(),
        TokenKind::Star => "`*`".into(),
        TokenKind::Slash => "`/`".into(),
        TokenKind::Caret => "`^`".into(),
        TokenKind::LParen => "`(`".into(),
        TokenKind::RParen => "`)`".into(),
        TokenKind::Eof => "end of input".into(),
    }
}

/// Conversion of an `f64` literal to the smallest-denominator rational whose
/// product with the denominator is exactly integral. Decimals like `0.5` or
/// `0.1` resolve to the intended fraction (`1/2`, `1/10`); values with no
/// small-denominator reading (denominator above 4096) are rejected so the
/// user writes an explicit fraction instead.
fn rational_from_f64(v: f64) -> Option<Rational> {
    if !v.is_finite() {
        return None;
    }
    for den in 1..=4096i64 {
        let num = v * den as f64;
        if num.fract() == 0.0 && num.abs() <= i64::MAX as f64 / 2.0 {
            return Some(Rational::new(num as i64, den));
        }
    }
    None
}
