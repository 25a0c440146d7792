//! Canonical printing with minimal parentheses.
//!
//! The printer and parser are mutually inverse: printing any normalized AST
//! and re-parsing it (in the same name environment) yields the same AST.
//! Normalization folds negative constants into explicit negation nodes, since
//! the lexer only ever produces non-negative number literals.

use super::{BinOp, Node, Rational};

/// Binding strength of a node when printed; parentheses are inserted whenever
/// a child binds more loosely than its context requires.
fn level(node: &Node) -> u8 {
    match node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        Node::Const(..) | Node::Coord(..) | Node::Param(..) | Node::LaxVar | Node::Unary(..) => 5,
    }
}

/// Rewrite constants so that every `Const` is non-negative, matching what the
/// parser can produce.
pub fn normalize(node: Node) -> Node {
    match node {
        Node::Const(v) if v.is_sign_negative() => Node::Neg(Box::new(Node::Const(-v))),
        Node::Const(v) => Node::Const(v),
        Node::Coord(i) => Node::Coord(i),
        Node::Param(p) => Node::Param(p),
        Node::LaxVar => Node::LaxVar,
        Node::Neg(a) => Node::Neg(Box::new(normalize(*a))),
        Node::Unary(f, a) => Node::Unary(f, Box::new(normalize(*a))),
        Node::Bin(op, a, b) => Node::Bin(op, Box::new(normalize(*a)), Box::new(normalize(*b))),
        Node::Pow(a, r) => Node::Pow(Box::new(normalize(*a)), r),
    }
}

pub fn print(node: &Node, coord_names: &[String]) -> String {
    let mut out = String::new();
    write_node(node, 0, coord_names, &mut out);
    out
}

fn write_node(node: &Node, min_level: u8, names: &[String], out: &mut String) {
    let own = level(node);
    let parens = own < min_level;
    if parens {
        out.push('(');
    }
    match node {
        Node::Const(v) => {
            // `{}` is shortest round-trip formatting for f64.
            out.push_str(&format!("{v}"));
        }
        Node::Coord(i) => match names.get(*i) {
            Some(n) => out.push_str(n),
            None => out.push_str(&format!("x{}", i + 1)),
        },
        Node::Param(p) => out.push_str(p),
        Node::LaxVar => out.push('p'),
        Node::Neg(a) => {
            out.push('-');
            write_node(a, 3, names, out);
        }
        Node::Unary(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_node(a, 0, names, out);
            out.push(')');
        }
        Node::Bin(op, a, b) => {
            let (sym, spaced) = match op {
                BinOp::Add => ("+", true),
                BinOp::Sub => ("-", true),
                BinOp::Mul => ("*", false),
                BinOp::Div => ("/", false),
            };
            write_node(a, own, names, out);
            if spaced {
                out.push(' ');
            }
            out.push_str(sym);
            if spaced {
                out.push(' ');
            }
            // Left associativity: the right child must bind strictly tighter.
            write_node(b, own + 1, names, out);
        }
        Node::Pow(a, r) => {
            write_node(a, 5, names, out);
            out.push('^');
            write_exponent(*r, out);
        }
    }
    if parens {
        out.push(')');
    }
}

fn write_exponent(r: Rational, out: &mut String) {
    if r.den == 1 {
        if r.num < 0 {
            out.push_str(&format!("({})", r.num));
        } else {
            out.push_str(&format!("{}", r.num));
        }
    } else {
        out.push_str(&format!("({}/{})", r.num, r.den));
    }
}
