//! Expression evaluation to `f64` and to jets.
//!
//! Jet evaluation walks the AST with an explicit symbol-to-jet assignment, so
//! one evaluator covers every differentiation pattern the toolkit needs:
//! derivatives in the chart coordinates (fiber variable held fixed), in the
//! fiber variable alone, or jointly in both.

use super::{BinOp, Node, UnaryFn};
use crate::error::{Error, Result};
use crate::jet::Jet;
use std::collections::HashMap;

/// Symbol-to-jet assignment for [`eval_jet`]. All jets must share one shape.
pub struct JetEnv {
    pub dim: usize,
    pub order: usize,
    /// One jet per chart coordinate.
    pub coords: Vec<Jet>,
    /// Jet bound to the fiber variable `p`, when in scope.
    pub lax: Option<Jet>,
    /// Named constants.
    pub params: HashMap<String, f64>,
}

impl JetEnv {
    /// Differentiate in the chart coordinates around `point`
    /// (coordinate `i` becomes the `i`-th jet variable).
    pub fn chart(point: &[f64], order: usize) -> JetEnv {
        let dim = point.len();
        JetEnv {
            dim,
            order,
            coords: (0..dim)
                .map(|i| Jet::variable(dim, order, i, point[i]))
                .collect(),
            lax: None,
            params: HashMap::new(),
        }
    }

    /// Chart-coordinate jets with the fiber variable held fixed at `p0`.
    pub fn chart_with_fixed_lax(point: &[f64], p0: f64, order: usize) -> JetEnv {
        let mut env = JetEnv::chart(point, order);
        env.lax = Some(Jet::constant(point.len(), order, p0));
        env
    }

    /// Joint jets: variable 0 is the fiber variable, variables `1..=n` are the
    /// chart coordinates.
    pub fn joint(p0: f64, point: &[f64], order: usize) -> JetEnv {
        let dim = point.len() + 1;
        JetEnv {
            dim,
            order,
            coords: (0..point.len())
                .map(|i| Jet::variable(dim, order, i + 1, point[i]))
                .collect(),
            lax: Some(Jet::variable(dim, order, 0, p0)),
            params: HashMap::new(),
        }
    }

    /// Differentiate in the fiber variable only, chart point held fixed.
    pub fn lax_only(p0: f64, point: &[f64], order: usize) -> JetEnv {
        JetEnv {
            dim: 1,
            order,
            coords: point
                .iter()
                .map(|&u| Jet::constant(1, order, u))
                .collect(),
            lax: Some(Jet::variable(1, order, 0, p0)),
            params: HashMap::new(),
        }
    }

    pub fn with_params(mut self, params: &HashMap<String, f64>) -> JetEnv {
        self.params = params.clone();
        self
    }
}

pub fn eval_f64(
    node: &Node,
    coords: &[f64],
    lax: Option<f64>,
    params: &HashMap<String, f64>,
) -> Result<f64> {
    let v = match node {
        Node::Const(v) => *v,
        Node::Coord(i) => *coords.get(*i).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "coordinate index {} out of range for point of dimension {}",
                i,
                coords.len()
            ))
        })?,
        Node::Param(name) => *params
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("parameter `{name}` has no value")))?,
        Node::LaxVar => lax.ok_or_else(|| {
            Error::InvalidArgument("fiber variable `p` has no value in this evaluation".into())
        })?,
        Node::Neg(a) => -eval_f64(a, coords, lax, params)?,
        Node::Unary(f, a) => {
            let x = eval_f64(a, coords, lax, params)?;
            match f {
                UnaryFn::Exp => x.exp(),
                UnaryFn::Ln => {
                    if x <= 0.0 {
                        return Err(domain_in(*f, node, format!("argument {x} not positive")));
                    }
                    x.ln()
                }
                UnaryFn::Sqrt => {
                    if x <= 0.0 {
                        return Err(domain_in(*f, node, format!("argument {x} not positive")));
                    }
                    x.sqrt()
                }
                UnaryFn::Sin => x.sin(),
                UnaryFn::Cos => x.cos(),
            }
        }
        Node::Bin(op, a, b) => {
            let x = eval_f64(a, coords, lax, params)?;
            let y = eval_f64(b, coords, lax, params)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(Error::domain(
                            "div",
                            format!("division by zero in `{}`", super::printer::print(node, &[])),
                        ));
                    }
                    x / y
                }
            }
        }
        Node::Pow(a, r) => {
            let x = eval_f64(a, coords, lax, params)?;
            if r.den == 1 {
                if x == 0.0 && r.num < 0 {
                    return Err(Error::domain("pow", "zero base with negative exponent"));
                }
                x.powi(r.num.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
            } else {
                if x <= 0.0 {
                    return Err(Error::domain(
                        "pow",
                        format!("fractional power of non-positive base {x}"),
                    ));
                }
                x.powf(r.num as f64 / r.den as f64)
            }
        }
    };
    Ok(v)
}

pub fn eval_jet(node: &Node, env: &JetEnv) -> Result<Jet> {
    match node {
        Node::Const(v) => Ok(Jet::constant(env.dim, env.order, *v)),
        Node::Coord(i) => env.coords.get(*i).cloned().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "coordinate index {} out of range for environment of dimension {}",
                i,
                env.coords.len()
            ))
        }),
        Node::Param(name) => {
            let v = *env.params.get(name).ok_or_else(|| {
                Error::InvalidArgument(format!("parameter `{name}` has no value"))
            })?;
            Ok(Jet::constant(env.dim, env.order, v))
        }
        Node::LaxVar => env.lax.clone().ok_or_else(|| {
            Error::InvalidArgument("fiber variable `p` has no value in this evaluation".into())
        }),
        Node::Neg(a) => Ok(eval_jet(a, env)?.neg()),
        Node::Unary(f, a) => {
            let x = eval_jet(a, env)?;
            match f {
                UnaryFn::Exp => Ok(x.exp()),
                UnaryFn::Ln => x.ln().map_err(|e| attach(e, node)),
                UnaryFn::Sqrt => x.sqrt().map_err(|e| attach(e, node)),
                UnaryFn::Sin => Ok(x.sin()),
                UnaryFn::Cos => Ok(x.cos()),
            }
        }
        Node::Bin(op, a, b) => {
            let x = eval_jet(a, env)?;
            let y = eval_jet(b, env)?;
            match op {
                BinOp::Add => Ok(x.add(&y)),
                BinOp::Sub => Ok(x.sub(&y)),
                BinOp::Mul => Ok(x.mul(&y)),
                BinOp::Div => x.try_div(&y).map_err(|e| attach(e, node)),
            }
        }
        Node::Pow(a, r) => {
            let x = eval_jet(a, env)?;
            x.powr(r.num, r.den).map_err(|e| attach(e, node))
        }
    }
}

/// Extend a domain error with the canonical text of the offending
/// subexpression.
fn attach(err: Error, node: &Node) -> Error {
    match err {
        Error::Domain { op, message } => Error::Domain {
            op,
            message: format!("{message} in `{}`", super::printer::print(node, &[])),
        },
        other => other,
    }
}

fn domain_in(f: UnaryFn, node: &Node, message: String) -> Error {
    Error::Domain {
        op: f.name().to_string(),
        message: format!("{message} in `{}`", super::printer::print(node, &[])),
    }
}
