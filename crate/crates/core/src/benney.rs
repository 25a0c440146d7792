//! Dispersionless-KP (Benney) reductions.
//!
//! A Lax family is a real function `λ(p, u¹..uⁿ)` with the normalization
//! `λ = p + Σ_{k≥0} A^k(u)/p^{k+1}` at `p → ∞`. An `n`-component reduction
//! is carried by the `n` real critical points `v^i(u)` of `p ↦ λ`, whose
//! critical values `r^i = λ(v^i)` serve as Riemann invariants. This module
//! computes the moments `A^k`, locates the critical points, builds the
//! Riemann-invariant chart as truncated series, verifies the chordal Loewner
//! and Gibbons–Tsarev consistency equations, assembles the residue pairing
//! (metric and structure constants) and the induced Riemannian F-manifold
//! structure, optionally twisted by per-axis weight functions `φ_i(r^i)`.
//!
//! Moments are extracted from a truncated Laurent expansion in `w = 1/p`
//! with jet coefficients; residues at the simple zeros of `λ_p` are Laurent
//! coefficients of one-sided jet expansions, not contour quadratures.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::chart::{Chart, SampleBox};
use crate::compat::{
    self, egorov_connection_jets, CanonicalConnectionIdentities, CanonicalCurvatureVanishing,
    EgorovCheck,
};
use crate::error::{Error, Result};
use crate::expr::{BinOp, ExprContext, FieldExpr, JetEnv, Node, UnaryFn};
use crate::geometry;
use crate::jet::Jet;
use crate::linalg::invert_f64;
use crate::residual::{ResidualSample, Tolerance};
use crate::series::invert_series_map;
use crate::tensor::{EvalTensor, Valence};

/// Default jet depth of a reduction (series order in both charts).
pub const DEFAULT_DEPTH: usize = 4;
/// Default number of retained moments is `A^0..A^{DEFAULT_MOMENTS}`.
pub const DEFAULT_MOMENTS: usize = 5;

// ---------------------------------------------------------------------------
// Truncated Laurent series in w = 1/p with jet coefficients.
// ---------------------------------------------------------------------------

/// `coeffs[k]` multiplies `w^(lead + k)`; powers below `lead` are known to be
/// zero, powers above `top()` are unknown (truncated). `log_w` is an exactly
/// tracked multiple of `ln w` riding along the series (`ln w = −ln p`).
#[derive(Debug, Clone)]
struct WSeries {
    lead: i64,
    coeffs: Vec<Jet>,
    log_w: f64,
}

impl WSeries {
    fn top(&self) -> i64 {
        self.lead + self.coeffs.len() as i64 - 1
    }

    fn zero_jet(&self) -> Jet {
        Jet::constant(self.coeffs[0].dim(), self.coeffs[0].order(), 0.0)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.max_abs_coeff() == 0.0)
    }

    /// Coefficient of `w^power`; zero below `lead`, panics above `top`.
    fn coeff(&self, power: i64) -> Jet {
        assert!(power <= self.top(), "w-series coefficient beyond validity");
        if power < self.lead {
            self.zero_jet()
        } else {
            self.coeffs[(power - self.lead) as usize].clone()
        }
    }

    /// Drop leading coefficients that are exactly zero (keeps one).
    fn trim(mut self) -> WSeries {
        let mut cut = 0;
        while cut + 1 < self.coeffs.len() && self.coeffs[cut].max_abs_coeff() == 0.0 {
            cut += 1;
        }
        if cut > 0 {
            self.coeffs.drain(..cut);
            self.lead += cut as i64;
        }
        self
    }

    /// Exact jet at power 0, valid through `w^top`.
    fn from_jet(j: Jet, top: i64) -> WSeries {
        assert!(top >= 0);
        let zero = Jet::constant(j.dim(), j.order(), 0.0);
        let mut coeffs = vec![j];
        coeffs.resize(top as usize + 1, zero);
        WSeries {
            lead: 0,
            coeffs,
            log_w: 0.0,
        }
    }

    /// The series of `p` itself: `w^{-1}` exactly.
    fn p_series(dim: usize, order: usize, top: i64) -> WSeries {
        let zero = Jet::constant(dim, order, 0.0);
        let mut coeffs = vec![Jet::constant(dim, order, 1.0)];
        coeffs.resize((top + 1) as usize + 1, zero);
        WSeries {
            lead: -1,
            coeffs,
            log_w: 0.0,
        }
    }

    /// The series of `p − b` for a jet `b`.
    fn p_minus(b: &Jet, top: i64) -> WSeries {
        let mut s = WSeries::p_series(b.dim(), b.order(), top);
        s.coeffs[1] = b.neg();
        s
    }

    fn add(&self, rhs: &WSeries) -> WSeries {
        let lead = self.lead.min(rhs.lead);
        let top = self.top().min(rhs.top());
        let mut coeffs = Vec::with_capacity((top - lead + 1) as usize);
        for m in lead..=top {
            coeffs.push(self.coeff(m).add(&rhs.coeff(m)));
        }
        WSeries {
            lead,
            coeffs,
            log_w: self.log_w + rhs.log_w,
        }
        .trim()
    }

    fn neg(&self) -> WSeries {
        self.scale_f64(-1.0)
    }

    fn sub(&self, rhs: &WSeries) -> WSeries {
        self.add(&rhs.neg())
    }

    fn scale_f64(&self, s: f64) -> WSeries {
        WSeries {
            lead: self.lead,
            coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect(),
            log_w: self.log_w * s,
        }
    }

    /// Multiply every coefficient by a jet (a `w`-independent factor).
    fn mul_jet(&self, j: &Jet) -> Result<WSeries> {
        if self.log_w != 0.0 {
            return Err(Error::domain(
                "w-series",
                "cannot multiply a series carrying a ln term by a coefficient",
            ));
        }
        Ok(WSeries {
            lead: self.lead,
            coeffs: self.coeffs.iter().map(|c| c.mul(j)).collect(),
            log_w: 0.0,
        })
    }

    fn mul(&self, rhs: &WSeries) -> Result<WSeries> {
        if self.log_w != 0.0 || rhs.log_w != 0.0 {
            return Err(Error::domain(
                "w-series",
                "cannot multiply series carrying ln terms",
            ));
        }
        let lead = self.lead + rhs.lead;
        let top = (self.top() + rhs.lead).min(rhs.top() + self.lead);
        let len = (top - lead + 1) as usize;
        let mut coeffs = vec![self.zero_jet(); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.max_abs_coeff() == 0.0 {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                if b.max_abs_coeff() == 0.0 {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
            }
        }
        Ok(WSeries {
            lead,
            coeffs,
            log_w: 0.0,
        }
        .trim())
    }

    /// Laurent reciprocal through the valid window.
    fn recip(&self) -> Result<WSeries> {
        if self.log_w != 0.0 {
            return Err(Error::domain(
                "w-series",
                "cannot invert a series carrying a ln term",
            ));
        }
        let s = self.clone().trim();
        if s.is_zero() {
            return Err(Error::domain("w-series", "division by the zero series"));
        }
        let q0 = s.coeffs[0].recip()?;
        let k = s.coeffs.len() - 1;
        let mut q = vec![q0.clone()];
        for m in 1..=k {
            let mut acc = s.zero_jet();
            for j in 1..=m {
                acc = acc.add(&s.coeffs[j].mul(&q[m - j]));
            }
            q.push(acc.mul(&q0).neg());
        }
        Ok(WSeries {
            lead: -s.lead,
            coeffs: q,
            log_w: 0.0,
        })
    }

    /// Shift all powers by `delta` (multiply by `w^delta`).
    fn shift_powers(mut self, delta: i64) -> WSeries {
        self.lead += delta;
        self
    }

    /// Regular part: the same coefficients re-based at power 0.
    fn rebased(&self) -> WSeries {
        WSeries {
            lead: 0,
            coeffs: self.coeffs.clone(),
            log_w: 0.0,
        }
    }

    /// Extend the window downwards with known zeros so that `lead == new_lead`.
    fn extended_down_to(&self, new_lead: i64) -> WSeries {
        if self.lead <= new_lead {
            return self.clone();
        }
        let pad = (self.lead - new_lead) as usize;
        let mut coeffs = vec![self.zero_jet(); pad];
        coeffs.extend(self.coeffs.iter().cloned());
        WSeries {
            lead: new_lead,
            coeffs,
            log_w: self.log_w,
        }
    }

    /// Compose an analytic germ with the positive-power part of `self`
    /// (which must have `lead == 0`): returns `Σ_m g[m]·S^m` where `S` is
    /// `self` with its power-0 coefficient removed and `g[m] = f⁽ᵐ⁾(c₀)/m!`.
    fn apply_germ(&self, g: &[Jet]) -> Result<WSeries> {
        assert_eq!(self.lead, 0);
        assert_eq!(self.log_w, 0.0);
        let t = self.top();
        let mut s = self.clone();
        s.coeffs[0] = self.zero_jet();
        let s = s.trim();
        let mut res = WSeries::from_jet(g[g.len() - 1].clone(), t);
        for m in (0..g.len() - 1).rev() {
            res = res.mul(&s)?.add(&WSeries::from_jet(g[m].clone(), t));
        }
        Ok(res)
    }

    /// Natural logarithm. Factors `w^lead` into the `log_w` bookkeeping and
    /// requires the leading coefficient to be positive at the sample point.
    fn ln_series(&self) -> Result<WSeries> {
        if self.log_w != 0.0 {
            return Err(Error::domain(
                "w-series",
                "logarithm of a series already carrying a ln term",
            ));
        }
        let s = self.clone().trim();
        if s.is_zero() {
            return Err(Error::domain("w-series", "logarithm of the zero series"));
        }
        let c0 = s.coeffs[0].clone();
        if c0.value() <= 0.0 {
            return Err(Error::domain(
                "w-series",
                format!(
                    "logarithm of a series whose leading coefficient is {:.3e} ≤ 0 at the sample point",
                    c0.value()
                ),
            ));
        }
        let r = s.rebased();
        let m_max = r.top() as usize;
        let rec = c0.recip()?;
        let mut g = vec![c0.ln()?];
        if m_max >= 1 {
            g.push(rec.clone());
        }
        for m in 2..=m_max {
            let prev = g[m - 1].clone();
            g.push(prev.mul(&rec).scale(-((m - 1) as f64) / m as f64));
        }
        let mut out = r.apply_germ(&g)?;
        out.log_w = s.lead as f64;
        Ok(out)
    }

    /// Entire functions of the series; the argument must stay bounded at
    /// `p → ∞`, i.e. have no negative powers.
    fn entire(&self, f: UnaryFn) -> Result<WSeries> {
        if self.log_w != 0.0 {
            return Err(Error::domain(
                "w-series",
                "transcendental function of a series carrying a ln term",
            ));
        }
        let s = self.clone().trim();
        if s.lead < 0 {
            return Err(Error::domain(
                "w-series",
                format!(
                    "{}(·) of a series with a pole at p = ∞ (leading power p^{}) has an essential singularity",
                    f.name(),
                    -s.lead
                ),
            ));
        }
        let r = s.extended_down_to(0);
        let c0 = r.coeffs[0].clone();
        let m_max = r.top() as usize;
        let mut g = Vec::with_capacity(m_max + 1);
        match f {
            UnaryFn::Exp => {
                g.push(c0.exp());
                for m in 1..=m_max {
                    let prev = g[m - 1].clone();
                    g.push(prev.scale(1.0 / m as f64));
                }
            }
            UnaryFn::Sin | UnaryFn::Cos => {
                let (sv, cv) = (c0.sin(), c0.cos());
                let cycle: [Jet; 4] = if f == UnaryFn::Sin {
                    [sv.clone(), cv.clone(), sv.neg(), cv.neg()]
                } else {
                    [cv.clone(), sv.neg(), cv.neg(), sv]
                };
                let mut fact = 1.0;
                for m in 0..=m_max {
                    if m > 0 {
                        fact *= m as f64;
                    }
                    g.push(cycle[m % 4].scale(1.0 / fact));
                }
            }
            _ => unreachable!("entire() only handles exp, sin, cos"),
        }
        r.apply_germ(&g)
    }

    /// Rational power `(·)^{num/den}` with `den ≥ 1`.
    fn powr_series(&self, num: i64, den: i64) -> Result<WSeries> {
        assert!(den >= 1);
        if den == 1 {
            if num == 0 {
                let top = self.top() - self.lead;
                return Ok(WSeries::from_jet(
                    Jet::constant(self.coeffs[0].dim(), self.coeffs[0].order(), 1.0),
                    top.max(0),
                ));
            }
            if num < 0 {
                return self.recip()?.powr_series(-num, 1);
            }
            let mut res = self.clone();
            for _ in 1..num {
                res = res.mul(self)?;
            }
            return Ok(res);
        }
        if self.log_w != 0.0 {
            return Err(Error::domain(
                "w-series",
                "fractional power of a series carrying a ln term",
            ));
        }
        let s = self.clone().trim();
        if s.is_zero() {
            return Err(Error::domain(
                "w-series",
                "fractional power of the zero series",
            ));
        }
        if (s.lead * num) % den != 0 {
            return Err(Error::domain(
                "w-series",
                format!(
                    "the power ({num}/{den}) of a series with leading power p^{} branches at p = ∞",
                    -s.lead
                ),
            ));
        }
        let out_lead = s.lead * num / den;
        let r = s.rebased();
        let c0 = r.coeffs[0].clone();
        let m_max = r.top() as usize;
        let q = num as f64 / den as f64;
        let rec = c0.recip()?;
        let mut g = vec![c0.powr(num, den)?];
        for m in 1..=m_max {
            let prev = g[m - 1].clone();
            g.push(prev.mul(&rec).scale((q - (m as f64 - 1.0)) / m as f64));
        }
        Ok(r.apply_germ(&g)?.shift_powers(out_lead))
    }
}

/// Evaluation environment for `w`-series expansion of expressions at `p → ∞`:
/// chart coordinates become jets at the base point, `p` becomes `w^{-1}`.
struct WEnv {
    dim: usize,
    order: usize,
    coords: Vec<Jet>,
    params: HashMap<String, f64>,
    w_top: i64,
}

fn weval(node: &Node, env: &WEnv) -> Result<WSeries> {
    match node {
        Node::Const(c) => Ok(WSeries::from_jet(
            Jet::constant(env.dim, env.order, *c),
            env.w_top,
        )),
        Node::Coord(i) => Ok(WSeries::from_jet(env.coords[*i].clone(), env.w_top)),
        Node::Param(name) => {
            let v = env.params.get(name).ok_or_else(|| {
                Error::domain("moments", format!("parameter `{name}` has no value"))
            })?;
            Ok(WSeries::from_jet(
                Jet::constant(env.dim, env.order, *v),
                env.w_top,
            ))
        }
        Node::LaxVar => Ok(WSeries::p_series(env.dim, env.order, env.w_top)),
        Node::Neg(a) => Ok(weval(a, env)?.neg()),
        Node::Unary(f, a) => {
            let s = weval(a, env)?;
            match f {
                UnaryFn::Ln => s.ln_series(),
                UnaryFn::Sqrt => s.powr_series(1, 2),
                UnaryFn::Exp | UnaryFn::Sin | UnaryFn::Cos => s.entire(*f),
            }
        }
        Node::Bin(op, a, b) => {
            let sa = weval(a, env)?;
            let sb = weval(b, env)?;
            match op {
                BinOp::Add => Ok(sa.add(&sb)),
                BinOp::Sub => Ok(sa.sub(&sb)),
                BinOp::Mul => sa.mul(&sb),
                BinOp::Div => sa.mul(&sb.recip()?),
            }
        }
        Node::Pow(a, r) => weval(a, env)?.powr_series(r.num, r.den),
    }
}

// ---------------------------------------------------------------------------
// Lax families.
// ---------------------------------------------------------------------------

/// Structural kind of a Lax family, which fixes how singular points in `p`
/// are known and how the family is evaluated on the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaxKind {
    /// `λ = p + Σ_k a_k(u)/(p − b_k(u))`.
    Rational,
    /// `λ = p + Σ_k ε_k ln(p − b_k(u))` with `Σ ε_k = 0`.
    Logarithmic,
    /// An arbitrary expression in `p` and the chart coordinates.
    Expression,
}

/// A family of Lax functions `λ(p, u)` over a chart, normalized so that
/// `λ = p + Σ A^k/p^{k+1}` at `p → ∞`.
#[derive(Debug, Clone)]
pub struct LaxFamily {
    kind: LaxKind,
    chart: Chart,
    expr: FieldExpr,
    rational_terms: Vec<(FieldExpr, FieldExpr)>,
    log_terms: Vec<(f64, FieldExpr)>,
    params: HashMap<String, f64>,
    seeds: Vec<(f64, f64)>,
}

fn lnabs_jet(j: &Jet) -> Result<Jet> {
    if j.value() < 0.0 {
        j.neg().ln()
    } else {
        j.ln()
    }
}

impl LaxFamily {
    /// `λ = p + Σ a_k/(p − b_k)` from expression pairs `(a_k, b_k)` in the
    /// chart coordinates.
    pub fn rational(chart: Chart, terms: &[(&str, &str)]) -> Result<LaxFamily> {
        let ctx = ExprContext::chart(chart.names());
        let mut parsed = Vec::with_capacity(terms.len());
        let mut root = Node::LaxVar;
        for (a_src, b_src) in terms {
            let a = FieldExpr::parse(a_src, &ctx)?;
            let b = FieldExpr::parse(b_src, &ctx)?;
            root = Node::Bin(
                BinOp::Add,
                Box::new(root),
                Box::new(Node::Bin(
                    BinOp::Div,
                    Box::new(a.node().clone()),
                    Box::new(Node::Bin(
                        BinOp::Sub,
                        Box::new(Node::LaxVar),
                        Box::new(b.node().clone()),
                    )),
                )),
            );
            parsed.push((a, b));
        }
        let expr = FieldExpr::from_node_named(root, chart.names());
        Ok(LaxFamily {
            kind: LaxKind::Rational,
            chart,
            expr,
            rational_terms: parsed,
            log_terms: Vec::new(),
            params: HashMap::new(),
            seeds: Vec::new(),
        })
    }

    /// `λ = p + Σ ε_k ln(p − b_k)` from weight/branch-point pairs. The
    /// weights must sum to zero, otherwise `λ − p` grows like `ln p` and the
    /// moment expansion does not exist.
    pub fn logarithmic(chart: Chart, terms: &[(f64, &str)]) -> Result<LaxFamily> {
        let sum: f64 = terms.iter().map(|(e, _)| e).sum();
        let mag: f64 = terms.iter().map(|(e, _)| e.abs()).sum();
        if sum.abs() > 1e-12 * mag.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "logarithmic Lax weights must sum to zero (Σ ε_k = {sum:e}); otherwise λ − p \
                 carries a ln p term and the expansion λ = p + Σ A^k/p^{{k+1}} fails"
            )));
        }
        let ctx = ExprContext::chart(chart.names());
        let mut parsed = Vec::with_capacity(terms.len());
        let mut root = Node::LaxVar;
        for (eps, b_src) in terms {
            let b = FieldExpr::parse(b_src, &ctx)?;
            root = Node::Bin(
                BinOp::Add,
                Box::new(root),
                Box::new(Node::Bin(
                    BinOp::Mul,
                    Box::new(Node::Const(*eps)),
                    Box::new(Node::Unary(
                        UnaryFn::Ln,
                        Box::new(Node::Bin(
                            BinOp::Sub,
                            Box::new(Node::LaxVar),
                            Box::new(b.node().clone()),
                        )),
                    )),
                )),
            );
            parsed.push((*eps, b));
        }
        let expr = FieldExpr::from_node_named(root, chart.names());
        Ok(LaxFamily {
            kind: LaxKind::Logarithmic,
            chart,
            expr,
            rational_terms: Vec::new(),
            log_terms: parsed,
            params: HashMap::new(),
            seeds: Vec::new(),
        })
    }

    /// An arbitrary `λ(p, u)` expression. Critical-point searches for this
    /// kind need explicit seed brackets (there is no structural list of
    /// singular points to anchor the search).
    pub fn expression(chart: Chart, src: &str) -> Result<LaxFamily> {
        let ctx = ExprContext::chart_with_lax(chart.names());
        let expr = FieldExpr::parse(src, &ctx)?;
        Ok(LaxFamily {
            kind: LaxKind::Expression,
            chart,
            expr,
            rational_terms: Vec::new(),
            log_terms: Vec::new(),
            params: HashMap::new(),
            seeds: Vec::new(),
        })
    }

    pub fn with_params(mut self, params: HashMap<String, f64>) -> LaxFamily {
        self.params = params;
        self
    }

    /// Default seed brackets for critical-point searches.
    pub fn with_seeds(mut self, seeds: Vec<(f64, f64)>) -> LaxFamily {
        self.seeds = seeds;
        self
    }

    pub fn kind(&self) -> LaxKind {
        self.kind
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn expr(&self) -> &FieldExpr {
        &self.expr
    }

    pub fn params(&self) -> &HashMap<String, f64> {
        &self.params
    }

    pub fn seeds(&self) -> &[(f64, f64)] {
        &self.seeds
    }

    /// Evaluate `λ` as a jet. For the logarithmic kind the real branch is
    /// taken through `ln |p − b_k|`: with `Σ ε_k = 0` the imaginary parts of
    /// the principal branches add up to a locally constant function, so all
    /// real derivative data is that of the analytic continuation.
    pub fn lambda_jet(&self, env: &JetEnv) -> Result<Jet> {
        match self.kind {
            LaxKind::Logarithmic => {
                let p = env.lax.clone().ok_or_else(|| {
                    Error::InvalidArgument(
                        "Lax evaluation needs the fiber variable in the environment".into(),
                    )
                })?;
                let mut acc = p.clone();
                for (eps, b) in &self.log_terms {
                    let arg = p.sub(&b.eval_jet(env)?);
                    acc = acc.add(&lnabs_jet(&arg)?.scale(*eps));
                }
                Ok(acc)
            }
            _ => self.expr.eval_jet(env),
        }
    }

    /// `λ(p0, u0)` as a plain number.
    pub fn lambda_value(&self, p0: f64, u0: &[f64]) -> Result<f64> {
        let env = JetEnv::lax_only(p0, u0, 1).with_params(&self.params);
        Ok(self.lambda_jet(&env)?.value())
    }

    /// `(λ_p, λ_pp)` at `(p0, u0)`.
    pub fn lambda_p_pp(&self, p0: f64, u0: &[f64]) -> Result<(f64, f64)> {
        let env = JetEnv::lax_only(p0, u0, 2).with_params(&self.params);
        let j = self.lambda_jet(&env)?;
        Ok((j.d1(0), j.deriv(&[2])))
    }

    fn lambda_p(&self, p0: f64, u0: &[f64]) -> Result<f64> {
        let env = JetEnv::lax_only(p0, u0, 1).with_params(&self.params);
        Ok(self.lambda_jet(&env)?.d1(0))
    }

    /// Structurally known singular points in `p` at `u0` (poles or branch
    /// points), sorted; `None` for the expression kind.
    fn singular_points(&self, u0: &[f64]) -> Result<Option<Vec<f64>>> {
        let bs: Vec<&FieldExpr> = match self.kind {
            LaxKind::Rational => self.rational_terms.iter().map(|(_, b)| b).collect(),
            LaxKind::Logarithmic => self.log_terms.iter().map(|(_, b)| b).collect(),
            LaxKind::Expression => return Ok(None),
        };
        let mut pts = Vec::with_capacity(bs.len());
        for b in bs {
            pts.push(b.eval_f64(u0, None, &self.params)?);
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs()));
        Ok(Some(pts))
    }
}

// ---------------------------------------------------------------------------
// Moments.
// ---------------------------------------------------------------------------

/// Moments `A^0..A^{m_top}` of `λ = p + Σ A^k/p^{k+1}` as jets of the given
/// order at `u0`. Fails if the expansion of `λ − p` has a `ln p` term, any
/// constant or positive power of `p`, or insufficient Laurent validity.
pub fn moments(lax: &LaxFamily, u0: &[f64], order: usize, m_top: usize) -> Result<Vec<Jet>> {
    let n = lax.chart.dim();
    assert_eq!(u0.len(), n);
    let w_top = m_top as i64 + 4;
    let env_u = JetEnv::chart(u0, order).with_params(&lax.params);
    let series = match lax.kind {
        LaxKind::Rational => {
            let mut s = WSeries::p_series(n, order, w_top);
            for (a, b) in &lax.rational_terms {
                let aj = a.eval_jet(&env_u)?;
                let bj = b.eval_jet(&env_u)?;
                let term = WSeries::p_minus(&bj, w_top).recip()?.mul_jet(&aj)?;
                s = s.add(&term);
            }
            s
        }
        LaxKind::Logarithmic => {
            let mut s = WSeries::p_series(n, order, w_top);
            for (eps, b) in &lax.log_terms {
                let bj = b.eval_jet(&env_u)?;
                let term = WSeries::p_minus(&bj, w_top).ln_series()?.scale_f64(*eps);
                s = s.add(&term);
            }
            s
        }
        LaxKind::Expression => {
            let env = WEnv {
                dim: n,
                order,
                coords: (0..n)
                    .map(|a| Jet::variable(n, order, a, u0[a]))
                    .collect(),
                params: lax.params.clone(),
                w_top,
            };
            weval(lax.expr.node(), &env)?
        }
    };
    let tail = series.sub(&WSeries::p_series(n, order, w_top));
    if tail.log_w.abs() > 1e-9 {
        return Err(Error::domain(
            "moments",
            format!(
                "asymptotics λ = p + O(1/p) violated: λ − p carries {:.3e}·ln p",
                -tail.log_w
            ),
        ));
    }
    if tail.top() < m_top as i64 + 1 {
        return Err(Error::InvalidArgument(format!(
            "w-series validity exhausted: moments through A^{m_top} need the expansion of λ to \
             order 1/p^{}, but it is only valid to 1/p^{}",
            m_top + 1,
            tail.top().max(0)
        )));
    }
    let mut scale = 1.0_f64;
    for k in 0..=m_top {
        scale = scale.max(tail.coeff(k as i64 + 1).max_abs_coeff());
    }
    for power in tail.lead..=0 {
        let c = tail.coeff(power).max_abs_coeff();
        if c > 1e-9 * scale {
            return Err(Error::domain(
                "moments",
                format!(
                    "asymptotics λ = p + O(1/p) violated: the coefficient of p^{} in λ − p has \
                     magnitude {c:.3e}",
                    -power
                ),
            ));
        }
    }
    Ok((0..=m_top).map(|k| tail.coeff(k as i64 + 1)).collect())
}

// ---------------------------------------------------------------------------
// Critical points.
// ---------------------------------------------------------------------------

const LADDER_BASE: f64 = 0.02;
const LADDER_LO: i32 = -45;
const LADDER_HI: i32 = 23;

/// Probe offsets `0.02·2^k·scale`, ascending.
fn ladder(scale: f64) -> Vec<f64> {
    (LADDER_LO..=LADDER_HI)
        .map(|k| LADDER_BASE * (k as f64).exp2() * scale)
        .collect()
}

/// Sign-change brackets of `λ_p` on the real axis, anchored at the family's
/// structural singular points.
fn ladder_brackets(lax: &LaxFamily, u0: &[f64]) -> Result<Vec<(f64, f64)>> {
    let sing = lax.singular_points(u0)?.ok_or_else(|| {
        Error::InvalidArgument(
            "critical-point search for an expression-kind Lax family needs explicit seed brackets"
                .into(),
        )
    })?;
    if sing.is_empty() {
        return Err(Error::InvalidArgument(
            "the Lax family has no singular points in p: there is nothing to anchor a \
             critical-point search to (supply seed brackets)"
                .into(),
        ));
    }
    let s_min = sing[0];
    let s_max = *sing.last().unwrap();
    let scale0 = (s_max - s_min).max(1.0);
    let steps = ladder(scale0);

    // Probe sets per interval between (and beyond) singular points.
    let mut intervals: Vec<Vec<f64>> = Vec::new();
    let mut left: Vec<f64> = steps.iter().map(|t| s_min - t).collect();
    left.reverse();
    intervals.push(left);
    for pair in sing.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mid = 0.5 * (a + b);
        let mut probes: Vec<f64> = steps
            .iter()
            .map(|t| a + t)
            .take_while(|x| *x < mid)
            .collect();
        let mut from_right: Vec<f64> = steps
            .iter()
            .map(|t| b - t)
            .take_while(|x| *x >= mid)
            .collect();
        from_right.reverse();
        probes.extend(from_right);
        intervals.push(probes);
    }
    intervals.push(steps.iter().map(|t| s_max + t).collect());

    let mut brackets = Vec::new();
    for probes in intervals {
        let mut prev: Option<(f64, f64)> = None;
        for x in probes {
            let fp = match lax.lambda_p(x, u0) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    prev = None;
                    continue;
                }
            };
            if let Some((px, pf)) = prev {
                if pf == 0.0 || pf.signum() != fp.signum() {
                    brackets.push((px, x));
                }
            }
            prev = Some((x, fp));
        }
    }
    Ok(brackets)
}

/// Refine one bracket by bisection plus a short Newton polish.
fn refine_root(lax: &LaxFamily, u0: &[f64], bracket: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let mut flo = lax.lambda_p(lo, u0)?;
    let width0 = (hi - lo).abs();
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
        let fm = lax.lambda_p(mid, u0).map_err(|e| {
            Error::RootFind(format!("λ_p evaluation failed inside a bracket at p = {mid}: {e}"))
        })?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..6 {
        let (fp, fpp) = match lax.lambda_p_pp(v, u0) {
            Ok(t) => t,
            Err(_) => break,
        };
        if fpp == 0.0 {
            break;
        }
        let step = fp / fpp;
        if !step.is_finite() || step.abs() > width0 {
            break;
        }
        v -= step;
    }
    Ok(v)
}

/// Real critical points of `p ↦ λ(p, u0)`: the `n` simple roots of `λ_p`,
/// sorted ascending. `seeds` (or the family's default seeds) override the
/// automatic singularity-anchored search with explicit sign-change brackets.
pub fn critical_points(
    lax: &LaxFamily,
    u0: &[f64],
    seeds: Option<&[(f64, f64)]>,
) -> Result<Vec<f64>> {
    let n = lax.chart.dim();
    assert_eq!(u0.len(), n);
    let seed_list: Option<&[(f64, f64)]> = match seeds {
        Some(s) => Some(s),
        None if !lax.seeds.is_empty() => Some(&lax.seeds),
        None => None,
    };
    let brackets = match seed_list {
        Some(list) => {
            let mut out = Vec::with_capacity(list.len());
            for &(lo, hi) in list {
                let flo = lax.lambda_p(lo, u0)?;
                let fhi = lax.lambda_p(hi, u0)?;
                if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
                    return Err(Error::RootFind(format!(
                        "seed bracket [{lo}, {hi}] does not bracket a sign change of λ_p \
                         (λ_p = {flo:.3e} and {fhi:.3e})"
                    )));
                }
                out.push((lo, hi));
            }
            out
        }
        None => ladder_brackets(lax, u0)?,
    };

    let mut roots = Vec::with_capacity(brackets.len());
    for b in brackets {
        roots.push(refine_root(lax, u0, b)?);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + a.abs()));

    for &v in &roots {
        let (fp, fpp) = lax.lambda_p_pp(v, u0)?;
        if fp.abs() > 1e-10 * (1.0 + fpp.abs() * (1.0 + v.abs())) {
            return Err(Error::RootFind(format!(
                "root candidate at p = {v} did not converge (λ_p = {fp:.3e})"
            )));
        }
        if fpp.abs() < 1e-8 {
            return Err(Error::domain(
                "critical_points",
                format!("critical point at p = {v} is not simple (λ_pp = {fpp:.3e})"),
            ));
        }
    }
    for pair in roots.windows(2) {
        let gap = pair[1] - pair[0];
        if gap < 1e-8 * (1.0 + pair[0].abs()) {
            return Err(Error::domain(
                "critical_points",
                format!(
                    "coinciding critical points near p = {} (gap {gap:.3e})",
                    pair[0]
                ),
            ));
        }
    }
    if roots.len() != n {
        return Err(Error::RootFind(format!(
            "expected {n} distinct real critical points for an {n}-component reduction, found {} \
             (λ_p sign changes on the probed real axis)",
            roots.len()
        )));
    }
    Ok(roots)
}

// ---------------------------------------------------------------------------
// Reductions: the Riemann-invariant chart as truncated series.
// ---------------------------------------------------------------------------

/// An `n`-component reduction at a base point: critical points, Riemann
/// invariants `r^i = λ(v^i)`, both chart transitions as truncated series,
/// and the moments in both charts.
#[derive(Debug, Clone)]
pub struct Reduction {
    chart: Chart,
    r_chart: Chart,
    u0: Vec<f64>,
    params: HashMap<String, f64>,
    depth: usize,
    m_top: usize,
    v: Vec<f64>,
    r0: Vec<f64>,
    lambda_pp_v: Vec<f64>,
    v_jets: Vec<Jet>,
    r_jets: Vec<Jet>,
    jacobian: Vec<f64>,
    jac_inv: Vec<f64>,
    u_of_r: Vec<Jet>,
    moments_u: Vec<Jet>,
    moments_r: Vec<Jet>,
    velocities_r: Vec<Jet>,
}

impl Reduction {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Riemann-invariant chart (`r1..rn`).
    pub fn r_chart(&self) -> &Chart {
        &self.r_chart
    }

    pub fn base_u(&self) -> &[f64] {
        &self.u0
    }

    pub fn params(&self) -> &HashMap<String, f64> {
        &self.params
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn m_top(&self) -> usize {
        self.m_top
    }

    /// Critical points at the base point, ascending.
    pub fn critical_points(&self) -> &[f64] {
        &self.v
    }

    /// Riemann invariants at the base point (critical values, in the order
    /// of the critical points).
    pub fn riemann_invariants(&self) -> &[f64] {
        &self.r0
    }

    /// `λ_pp(v^i)` at the base point.
    pub fn lambda_pp(&self) -> &[f64] {
        &self.lambda_pp_v
    }

    /// `v^i(u)` as jets in the `u`-chart.
    pub fn v_jets(&self) -> &[Jet] {
        &self.v_jets
    }

    /// `r^i(u)` as jets in the `u`-chart.
    pub fn r_jets(&self) -> &[Jet] {
        &self.r_jets
    }

    /// Row-major `∂r^i/∂u^a` at the base point (row `i`, column `a`).
    pub fn jacobian(&self) -> &[f64] {
        &self.jacobian
    }

    /// Row-major `∂u^a/∂r^i` at the base point (row `a`, column `i`).
    pub fn jacobian_inverse(&self) -> &[f64] {
        &self.jac_inv
    }

    /// `u^a(r)` displacement jets around the base point (zero value parts).
    pub fn u_of_r(&self) -> &[Jet] {
        &self.u_of_r
    }

    /// Moment `A^k` as a jet in the `u`-chart.
    pub fn moment_u(&self, k: usize) -> &Jet {
        &self.moments_u[k]
    }

    /// Moment `A^k` as a jet in the Riemann-invariant chart.
    pub fn moment_r(&self, k: usize) -> &Jet {
        &self.moments_r[k]
    }

    /// Characteristic velocity `v^i` as a jet in the Riemann-invariant chart.
    pub fn velocity_r(&self, i: usize) -> &Jet {
        &self.velocities_r[i]
    }

    pub fn velocities_r(&self) -> &[Jet] {
        &self.velocities_r
    }

    fn n(&self) -> usize {
        self.chart.dim()
    }
}

/// Build the reduction data at `u0`: critical points and Riemann invariants
/// with their series in both charts to order `depth`, and moments
/// `A^0..A^{m_top}`. `depth ≥ 3` so that the induced connection still has
/// differentiable (order ≥ 1) Christoffel jets.
pub fn reduce(
    lax: &LaxFamily,
    u0: &[f64],
    depth: usize,
    m_top: usize,
    seeds: Option<&[(f64, f64)]>,
) -> Result<Reduction> {
    if depth < 3 {
        return Err(Error::InvalidArgument(format!(
            "reduction depth must be at least 3 (got {depth}): the induced connection loses two \
             orders and its curvature one more"
        )));
    }
    let n = lax.chart.dim();
    assert_eq!(u0.len(), n);
    let v = critical_points(lax, u0, seeds)?;
    let moments_u = moments(lax, u0, depth, m_top)?;

    let id_shifts: Vec<Jet> = (0..n).map(|a| Jet::variable(n, depth, a, 0.0)).collect();
    let mut v_jets = Vec::with_capacity(n);
    let mut r_jets = Vec::with_capacity(n);
    let mut lambda_pp_v = Vec::with_capacity(n);
    for (i, &vi) in v.iter().enumerate() {
        let env = JetEnv::joint(vi, u0, depth + 2).with_params(&lax.params);
        let l_joint = lax.lambda_jet(&env)?;
        let lp = l_joint.derivative(0);
        let lpp = lp.derivative(0);
        let lp_t = lp.truncate(depth);
        let lpp_t = lpp.truncate(depth);

        // Series Newton for the displacement δ(u) with λ_p(v_i + δ, u) = 0.
        let mut delta = Jet::constant(n, depth, 0.0);
        for _ in 0..=depth {
            let mut shifts = vec![delta.nilpotent()];
            shifts.extend(id_shifts.iter().cloned());
            let num = lp_t.compose(&shifts)?;
            let den = lpp_t.compose(&shifts)?;
            delta = delta.sub(&num.mul(&den.recip()?)).nilpotent();
        }
        let mut shifts = vec![delta.clone()];
        shifts.extend(id_shifts.iter().cloned());
        let res = lp_t.compose(&shifts)?.max_abs_coeff();
        let scale = lp_t.max_abs_coeff().max(1.0);
        if res > 1e-8 * scale {
            return Err(Error::RootFind(format!(
                "series expansion of critical point v^{} around the base point did not converge \
                 (residual {res:.3e})",
                i + 1
            )));
        }
        v_jets.push(delta.add(&Jet::constant(n, depth, vi)));
        r_jets.push(l_joint.truncate(depth).compose(&shifts)?);
        lambda_pp_v.push(lpp.value());
    }
    let r0: Vec<f64> = r_jets.iter().map(|j| j.value()).collect();

    let jac = DMatrix::from_fn(n, n, |i, a| r_jets[i].d1(a));
    let jac_inv = invert_f64(jac.clone(), "Jacobian ∂r/∂u of the Riemann-invariant chart")?;
    let displacements: Vec<Jet> = r_jets.iter().map(|j| j.nilpotent()).collect();
    let u_of_r = invert_series_map(&displacements, "Riemann-invariant chart inversion")?;
    let moments_r: Vec<Jet> = moments_u
        .iter()
        .map(|a| a.compose(&u_of_r))
        .collect::<Result<_>>()?;
    let velocities_r: Vec<Jet> = v_jets
        .iter()
        .map(|j| j.compose(&u_of_r))
        .collect::<Result<_>>()?;

    let r_chart = Chart::new((1..=n).map(|i| format!("r{i}")).collect())?;
    Ok(Reduction {
        chart: lax.chart.clone(),
        r_chart,
        u0: u0.to_vec(),
        params: lax.params.clone(),
        depth,
        m_top,
        v,
        r0,
        lambda_pp_v,
        v_jets,
        r_jets,
        jacobian: jac.transpose().as_slice().to_vec(),
        jac_inv: jac_inv.transpose().as_slice().to_vec(),
        u_of_r,
        moments_u,
        moments_r,
        velocities_r,
    })
}

/// The reduction at default depth and moment count.
pub fn riemann_invariants(lax: &LaxFamily, u0: &[f64]) -> Result<Reduction> {
    reduce(lax, u0, DEFAULT_DEPTH, DEFAULT_MOMENTS, None)
}

// ---------------------------------------------------------------------------
// Consistency residuals: Loewner, Gibbons–Tsarev, λ_pp, moment chain.
// ---------------------------------------------------------------------------

/// Residual of the chordal Loewner system
/// `∂λ/∂r^i = ∂_i A⁰ · λ_p/(p − v^i)` at a probe value `p0`, maximized
/// over `i`. The `r`-derivatives are taken through the inverse Jacobian.
pub fn loewner_residual(lax: &LaxFamily, red: &Reduction, p0: f64) -> Result<ResidualSample> {
    let n = red.n();
    for (i, &vi) in red.v.iter().enumerate() {
        if (p0 - vi).abs() < 1e-6 * (1.0 + p0.abs()) {
            return Err(Error::domain(
                "loewner_residual",
                format!("p0 = {p0} coincides with critical point v^{} = {vi}", i + 1),
            ));
        }
    }
    let env = JetEnv::joint(p0, &red.u0, 1).with_params(&red.params);
    let l = lax.lambda_jet(&env)?;
    let lam_p = l.d1(0);
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        let mut lhs = 0.0;
        for a in 0..n {
            lhs += red.jac_inv[a * n + i] * l.d1(1 + a);
        }
        let rhs = red.moments_r[0].d1(i) * lam_p / (p0 - red.v[i]);
        worst = worst.merge(ResidualSample::new(
            (lhs - rhs).abs(),
            lhs.abs().max(rhs.abs()),
        ));
    }
    Ok(worst)
}

/// The two Gibbons–Tsarev residuals of a reduction, in the
/// Riemann-invariant chart.
#[derive(Debug, Clone, Copy)]
pub struct GibbonsTsarevResidual {
    /// `∂_i v^j = ∂_i A⁰/(v^i − v^j)`, `i ≠ j`.
    pub velocity: ResidualSample,
    /// `∂²_{ij} A⁰ = 2 ∂_i A⁰ ∂_j A⁰/(v^i − v^j)²`, `i ≠ j`.
    pub potential: ResidualSample,
}

impl GibbonsTsarevResidual {
    pub fn worst(&self) -> ResidualSample {
        self.velocity.merge(self.potential)
    }
}

pub fn gibbons_tsarev_residual(red: &Reduction) -> GibbonsTsarevResidual {
    let n = red.n();
    let a0 = &red.moments_r[0];
    let mut velocity = ResidualSample::ZERO;
    let mut potential = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let gap = red.v[i] - red.v[j];
            let lhs_v = red.velocities_r[j].d1(i);
            let rhs_v = a0.d1(i) / gap;
            velocity = velocity.merge(ResidualSample::new(
                (lhs_v - rhs_v).abs(),
                lhs_v.abs().max(rhs_v.abs()),
            ));
            if i < j {
                let lhs_p = a0.d2(i, j);
                let rhs_p = 2.0 * a0.d1(i) * a0.d1(j) / (gap * gap);
                potential = potential.merge(ResidualSample::new(
                    (lhs_p - rhs_p).abs(),
                    lhs_p.abs().max(rhs_p.abs()),
                ));
            }
        }
    }
    GibbonsTsarevResidual {
        velocity,
        potential,
    }
}

/// Residual of `λ_pp(v^i) · ∂_i A⁰ = 1`, maximized over `i`.
pub fn lambda_pp_identity_residual(red: &Reduction) -> Result<ResidualSample> {
    let mut worst = ResidualSample::ZERO;
    for i in 0..red.n() {
        let da = red.moments_r[0].d1(i);
        if da.abs() < 1e-12 {
            return Err(Error::domain(
                "lambda_pp_identity_residual",
                format!("∂_{} A⁰ vanishes at the base point", i + 1),
            ));
        }
        worst = worst.merge(ResidualSample::new(
            (red.lambda_pp_v[i] * da - 1.0).abs(),
            1.0,
        ));
    }
    Ok(worst)
}

/// Residual of the reduced second-flow chain
/// `∂_i A^k · v^i = ∂_i A^{k+1} + k A^{k−1} ∂_i A⁰` for `k ≤ m`, all `i`.
pub fn moment_chain_residual(red: &Reduction, m: usize) -> Result<ResidualSample> {
    if m + 1 > red.m_top {
        return Err(Error::InvalidArgument(format!(
            "moment chain to k = {m} needs moments through A^{}, but the reduction holds \
             A^0..A^{}",
            m + 1,
            red.m_top
        )));
    }
    let mut worst = ResidualSample::ZERO;
    for k in 0..=m {
        for i in 0..red.n() {
            let t1 = red.moments_r[k].d1(i) * red.v[i];
            let t2 = red.moments_r[k + 1].d1(i);
            let t3 = if k == 0 {
                0.0
            } else {
                k as f64 * red.moments_r[k - 1].value() * red.moments_r[0].d1(i)
            };
            worst = worst.merge(ResidualSample::new(
                (t1 - t2 - t3).abs(),
                t1.abs().max(t2.abs()).max(t3.abs()),
            ));
        }
    }
    Ok(worst)
}

/// The reduction's structure tensor in the `u`-chart, as jets at the base
/// point: the product is canonical in the Riemann invariants
/// (`c^i_{jk} = δ^i_jδ^i_k`), so pushing it through the chart map gives
/// `c^a_{bc} = Σ_i (∂u^a/∂r^i)(∂r^i/∂u^b)(∂r^i/∂u^c)`.
pub fn u_chart_structure(red: &Reduction, order: usize) -> Result<EvalTensor> {
    let n = red.n();
    let avail = red.r_jets[0].order().saturating_sub(1);
    if order > avail {
        return Err(Error::InvalidArgument(format!(
            "u-chart structure to jet order {order} needs a reduction of depth ≥ {}, \
             but this one holds order {avail}",
            order + 1
        )));
    }
    let j: Vec<Vec<Jet>> = red
        .r_jets
        .iter()
        .map(|rj| (0..n).map(|b| rj.derivative(b).truncate(order)).collect())
        .collect();
    let jinv =
        crate::linalg::jet_inverse(&j, "Jacobian ∂r/∂u of the Riemann-invariant chart")?;
    let mut jets = vec![Jet::constant(n, order, 0.0); n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let mut acc = Jet::constant(n, order, 0.0);
                for i in 0..n {
                    acc = acc.add(&jinv[a][i].mul(&j[i][b]).mul(&j[i][c]));
                }
                jets[crate::tensor::flat_index(n, &[a, b, c])] = acc.clone();
                jets[crate::tensor::flat_index(n, &[a, c, b])] = acc;
            }
        }
    }
    Ok(EvalTensor::new(n, Valence::PRODUCT, order, jets))
}

// ---------------------------------------------------------------------------
// Twists.
// ---------------------------------------------------------------------------

/// Per-axis twist weights: `n` functions of a single variable `s`, the `i`-th
/// evaluated along the `i`-th Riemann invariant. Weighting each residue
/// summand by `φ_i(r^i)` in the metric and `φ_i(r^i)²` in the structure
/// constants yields a second compatible structure on the same manifold.
#[derive(Debug, Clone)]
pub struct TwistSpec {
    phis: Vec<FieldExpr>,
}

impl TwistSpec {
    /// Parse weight expressions in the single variable `s`.
    pub fn parse(srcs: &[&str]) -> Result<TwistSpec> {
        let ctx = ExprContext::chart(&["s".to_string()]);
        let phis = srcs
            .iter()
            .map(|s| FieldExpr::parse(s, &ctx))
            .collect::<Result<Vec<_>>>()?;
        Ok(TwistSpec { phis })
    }

    pub fn from_exprs(phis: Vec<FieldExpr>) -> TwistSpec {
        TwistSpec { phis }
    }

    pub fn dim(&self) -> usize {
        self.phis.len()
    }

    pub fn exprs(&self) -> &[FieldExpr] {
        &self.phis
    }

    pub fn phi_value(&self, i: usize, r: f64) -> Result<f64> {
        self.phis[i].eval_f64(&[r], None, &HashMap::new())
    }

    /// `φ_i` as a univariate jet at the (jet-valued) argument.
    fn phi_jet(&self, i: usize, at: &Jet) -> Result<Jet> {
        let env = JetEnv {
            dim: at.dim(),
            order: at.order(),
            coords: vec![at.clone()],
            lax: None,
            params: HashMap::new(),
        };
        self.phis[i].eval_jet(&env)
    }
}

// ---------------------------------------------------------------------------
// Residue pairing.
// ---------------------------------------------------------------------------

/// The residue metric and (all-lower-index) structure tensor
/// `g(∂, ∂′) = Σ_i res_{p=v^i} (∂λ ∂′λ/λ_p) dp`,
/// `c(∂, ∂′, ∂″) = Σ_i res_{p=v^i} (∂λ ∂′λ ∂″λ/λ_p) dp`,
/// evaluated in the `u`-chart and the Riemann-invariant chart. With a twist,
/// the `i`-th summand carries `φ_i(r^i)` in `g` and `φ_i(r^i)²` in `c`.
#[derive(Debug, Clone)]
pub struct ResiduePairing {
    n: usize,
    g_u: Vec<f64>,
    c_u: Vec<f64>,
    g_r: Vec<f64>,
    c_r: Vec<f64>,
}

impl ResiduePairing {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g_u(&self, a: usize, b: usize) -> f64 {
        self.g_u[a * self.n + b]
    }

    pub fn g_r(&self, i: usize, j: usize) -> f64 {
        self.g_r[i * self.n + j]
    }

    pub fn c_u(&self, a: usize, b: usize, c: usize) -> f64 {
        self.c_u[(a * self.n + b) * self.n + c]
    }

    pub fn c_r(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c_r[(i * self.n + j) * self.n + k]
    }

    pub fn g_u_flat(&self) -> &[f64] {
        &self.g_u
    }

    pub fn g_r_flat(&self) -> &[f64] {
        &self.g_r
    }

    pub fn c_u_flat(&self) -> &[f64] {
        &self.c_u
    }

    pub fn c_r_flat(&self) -> &[f64] {
        &self.c_r
    }
}

/// Collapse a joint jet (fiber variable on axis 0) to a univariate jet in
/// the fiber displacement, chart coordinates frozen at the base point.
fn collapse_to_fiber(j: &Jet, n: usize) -> Result<Jet> {
    let order = j.order();
    let mut shifts = vec![Jet::variable(1, order, 0, 0.0)];
    shifts.extend((0..n).map(|_| Jet::constant(1, order, 0.0)));
    j.compose(&shifts)
}

pub fn residue_pairing(
    lax: &LaxFamily,
    red: &Reduction,
    twist: Option<&TwistSpec>,
) -> Result<ResiduePairing> {
    let n = red.n();
    if let Some(t) = twist {
        if t.dim() != n {
            return Err(Error::InvalidArgument(format!(
                "twist supplies {} weight functions for an {n}-component reduction",
                t.dim()
            )));
        }
    }
    let mut g_u = vec![0.0; n * n];
    let mut c_u = vec![0.0; n * n * n];
    let mut g_r = vec![0.0; n * n];
    let mut c_r = vec![0.0; n * n * n];
    for s in 0..n {
        let env = JetEnv::joint(red.v[s], &red.u0, 5).with_params(&red.params);
        let l = lax.lambda_jet(&env)?;
        let lp_uni = collapse_to_fiber(&l.derivative(0), n)?;
        let scale = lp_uni.max_abs_coeff().max(1e-300);
        if lp_uni.value().abs() > 1e-9 * scale {
            return Err(Error::domain(
                "residue_pairing",
                format!(
                    "λ_p does not vanish at the recorded critical point v^{} (value {:.3e})",
                    s + 1,
                    lp_uni.value()
                ),
            ));
        }
        // λ_p = t·h(t) with h regular and h(0) = λ_pp(v) ≠ 0: the residue of
        // N/λ_p at the simple zero is the value of N·h^{-1}.
        let h = Jet::from_coeffs(
            1,
            3,
            (1..=4).map(|k| lp_uni.coeff(&[k as u8])).collect(),
        );
        if h.value().abs() < 1e-8 {
            return Err(Error::domain(
                "residue_pairing",
                format!(
                    "critical point v^{} is not simple (λ_pp = {:.3e})",
                    s + 1,
                    h.value()
                ),
            ));
        }
        let hinv = h.recip()?;
        let fa: Vec<Jet> = (0..n)
            .map(|a| collapse_to_fiber(&l.derivative(1 + a).truncate(3), n))
            .collect::<Result<_>>()?;
        let fr: Vec<Jet> = (0..n)
            .map(|i| {
                let mut acc = Jet::constant(1, 3, 0.0);
                for a in 0..n {
                    acc = acc.add(&fa[a].scale(red.jac_inv[a * n + i]));
                }
                acc
            })
            .collect();
        let (wg, wc) = match twist {
            Some(t) => {
                let phi = t.phi_value(s, red.r0[s])?;
                if phi.abs() < 1e-12 {
                    return Err(Error::domain(
                        "residue_pairing",
                        format!("twist weight φ_{} vanishes at the base point", s + 1),
                    ));
                }
                (phi, phi * phi)
            }
            None => (1.0, 1.0),
        };
        for a in 0..n {
            for b in 0..n {
                let pair_u = fa[a].mul(&fa[b]);
                let pair_r = fr[a].mul(&fr[b]);
                g_u[a * n + b] += wg * pair_u.mul(&hinv).value();
                g_r[a * n + b] += wg * pair_r.mul(&hinv).value();
                for c in 0..n {
                    c_u[(a * n + b) * n + c] += wc * pair_u.mul(&fa[c]).mul(&hinv).value();
                    c_r[(a * n + b) * n + c] += wc * pair_r.mul(&fr[c]).mul(&hinv).value();
                }
            }
        }
    }
    Ok(ResiduePairing {
        n,
        g_u,
        c_u,
        g_r,
        c_r,
    })
}

/// Structural checks of a residue pairing against the reduction data.
#[derive(Debug, Clone, Copy)]
pub struct PairingChecks {
    /// `g` in the Riemann-invariant chart is `diag(φ_i ∂_i A⁰)`.
    pub diagonal: ResidualSample,
    /// `c` in the Riemann-invariant chart is `φ_i² ∂_i A⁰ δ_{ijk}`.
    pub canonical: ResidualSample,
    /// Pushing the `u`-chart tensors through the Jacobian reproduces the
    /// directly computed `r`-chart tensors.
    pub coherence: ResidualSample,
}

impl PairingChecks {
    pub fn worst(&self) -> ResidualSample {
        self.diagonal.merge(self.canonical).merge(self.coherence)
    }
}

pub fn pairing_checks(
    red: &Reduction,
    pr: &ResiduePairing,
    twist: Option<&TwistSpec>,
) -> Result<PairingChecks> {
    let n = red.n();
    let mut w = vec![1.0; n];
    if let Some(t) = twist {
        for i in 0..n {
            w[i] = t.phi_value(i, red.r0[i])?;
        }
    }
    let da: Vec<f64> = (0..n).map(|i| red.moments_r[0].d1(i)).collect();

    let g_scale = (0..n).fold(0.0_f64, |m, i| m.max((w[i] * da[i]).abs()));
    let mut diagonal = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j { w[i] * da[i] } else { 0.0 };
            diagonal = diagonal.merge(ResidualSample::new(
                (pr.g_r(i, j) - expected).abs(),
                g_scale,
            ));
        }
    }

    let c_scale = (0..n).fold(0.0_f64, |m, i| m.max((w[i] * w[i] * da[i]).abs()));
    let mut canonical = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let expected = if i == j && j == k {
                    w[i] * w[i] * da[i]
                } else {
                    0.0
                };
                canonical = canonical.merge(ResidualSample::new(
                    (pr.c_r(i, j, k) - expected).abs(),
                    c_scale,
                ));
            }
        }
    }

    let mut coherence = ResidualSample::ZERO;
    let inv = |a: usize, i: usize| red.jac_inv[a * n + i];
    for i in 0..n {
        for j in 0..n {
            let mut pushed = 0.0;
            for a in 0..n {
                for b in 0..n {
                    pushed += inv(a, i) * inv(b, j) * pr.g_u(a, b);
                }
            }
            coherence = coherence.merge(ResidualSample::new(
                (pushed - pr.g_r(i, j)).abs(),
                g_scale,
            ));
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut pushed = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            pushed += inv(a, i) * inv(b, j) * inv(c, k) * pr.c_u(a, b, c);
                        }
                    }
                }
                coherence = coherence.merge(ResidualSample::new(
                    (pushed - pr.c_r(i, j, k)).abs(),
                    c_scale,
                ));
            }
        }
    }
    Ok(PairingChecks {
        diagonal,
        canonical,
        coherence,
    })
}

// ---------------------------------------------------------------------------
// The induced Riemannian F-manifold structure at a point.
// ---------------------------------------------------------------------------

/// The structure of an F-manifold with compatible (generally non-flat)
/// connection induced by a reduction at one base point, in canonical
/// coordinates: the Riemann-invariant chart, or the twisted canonical chart
/// `s^i` with `ds^i = φ_i(r^i) dr^i` when a twist is given. In either chart
/// the metric is diagonal with potential `A⁰` and the product is canonical.
#[derive(Debug, Clone)]
pub struct PointManifold {
    chart: Chart,
    base: Vec<f64>,
    potential: Jet,
    metric: EvalTensor,
    gamma: EvalTensor,
    structure: EvalTensor,
    velocities: EvalTensor,
    twisted: bool,
}

impl PointManifold {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// The metric potential (`A⁰` in the active chart): `g_{ii} = ∂_i F`.
    pub fn potential(&self) -> &Jet {
        &self.potential
    }

    pub fn metric(&self) -> &EvalTensor {
        &self.metric
    }

    /// Levi-Civita Christoffel jets of the diagonal potential metric.
    pub fn gamma(&self) -> &EvalTensor {
        &self.gamma
    }

    /// Structure constants (canonical: `c^i_{jk} = δ^i_j δ^i_k`).
    pub fn structure(&self) -> &EvalTensor {
        &self.structure
    }

    /// Characteristic velocities of the reduced second flow.
    pub fn velocities(&self) -> &EvalTensor {
        &self.velocities
    }

    pub fn twisted(&self) -> bool {
        self.twisted
    }
}

/// Antiderivative of a univariate jet with zero constant term.
fn integrate1(j: &Jet) -> Jet {
    assert_eq!(j.dim(), 1);
    let order = j.order();
    let mut coeffs = vec![0.0; order + 1];
    for k in 0..order {
        coeffs[k + 1] = j.coeff(&[k as u8]) / (k as f64 + 1.0);
    }
    Jet::from_coeffs(1, order, coeffs)
}

pub fn manifold_at(red: &Reduction, twist: Option<&TwistSpec>) -> Result<PointManifold> {
    let n = red.n();
    let depth = red.depth;
    let (chart, potential, vels) = match twist {
        None => (
            red.r_chart.clone(),
            red.moments_r[0].clone(),
            red.velocities_r.clone(),
        ),
        Some(t) => {
            if t.dim() != n {
                return Err(Error::InvalidArgument(format!(
                    "twist supplies {} weight functions for an {n}-component reduction",
                    t.dim()
                )));
            }
            // Per-axis inverse reparameterization r^i(s^i) with
            // dr/ds = 1/φ_i(r), r(s₀) = r₀ (gauge s₀ = r₀), by Picard
            // iteration in univariate jets.
            let mut shifts = Vec::with_capacity(n);
            for i in 0..n {
                let phi0 = t.phi_value(i, red.r0[i])?;
                if phi0.abs() < 1e-12 {
                    return Err(Error::domain(
                        "manifold_at",
                        format!("twist weight φ_{} vanishes at the base point", i + 1),
                    ));
                }
                let mut rdisp = Jet::constant(1, depth, 0.0);
                for _ in 0..=depth {
                    let at = rdisp.add(&Jet::constant(1, depth, red.r0[i]));
                    let phi = t.phi_jet(i, &at)?;
                    rdisp = integrate1(&phi.recip()?);
                }
                shifts.push(rdisp.compose(&[Jet::variable(n, depth, i, 0.0)])?);
            }
            let potential = red.moments_r[0].compose(&shifts)?;
            let vels: Vec<Jet> = red
                .velocities_r
                .iter()
                .map(|v| v.compose(&shifts))
                .collect::<Result<_>>()?;
            let chart = Chart::new((1..=n).map(|i| format!("s{i}")).collect())?;
            (chart, potential, vels)
        }
    };

    let mut metric_jets = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            metric_jets.push(if i == j {
                potential.derivative(i)
            } else {
                Jet::constant(n, depth - 1, 0.0)
            });
        }
    }
    let metric = EvalTensor::new(n, Valence::METRIC, depth - 1, metric_jets);
    let gamma = egorov_connection_jets(&potential)?;
    let mut structure_jets = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = if i == j && j == k { 1.0 } else { 0.0 };
                structure_jets.push(Jet::constant(n, depth - 1, v));
            }
        }
    }
    let structure = EvalTensor::new(n, Valence::PRODUCT, depth - 1, structure_jets);
    let velocities = EvalTensor::new(n, Valence::VECTOR, depth, vels);
    Ok(PointManifold {
        chart,
        base: red.r0.clone(),
        potential,
        metric,
        gamma,
        structure,
        velocities,
        twisted: twist.is_some(),
    })
}

// ---------------------------------------------------------------------------
// Full structural checks of a point manifold.
// ---------------------------------------------------------------------------

/// All compatibility checks of the induced structure at one point.
#[derive(Debug, Clone, Copy)]
pub struct ManifoldChecks {
    /// Metric diagonality and potential closure in canonical coordinates.
    pub egorov: EgorovCheck,
    /// Invariance of the pairing under the product (both index positions).
    pub invariance: ResidualSample,
    /// Cyclic curvature–product obstruction (flatness-pencil integrand).
    pub curvature_obstruction: ResidualSample,
    /// Canonical-chart connection identities for the product-compatible
    /// connection.
    pub canonical_identities: CanonicalConnectionIdentities,
    /// Symmetry of the diagonal-system integrability data.
    pub tsarev_compatibility: ResidualSample,
    /// The characteristic velocities solve the canonical-chart system
    /// `∂_k v^i = Γ^i_{ki}(v^k − v^i)`.
    pub velocity_system: ResidualSample,
    /// Semi-Hamiltonian property of the velocity field.
    pub semi_hamiltonian: ResidualSample,
    /// The curvature components that must vanish even for non-flat
    /// compatible connections.
    pub special_curvature: CanonicalCurvatureVanishing,
    /// Largest curvature component (diagnostic: generically nonzero).
    pub curvature_max: f64,
    /// Smallest pairwise velocity gap (diagnostic).
    pub velocity_gap: f64,
}

impl ManifoldChecks {
    /// Named pass/fail residuals (diagnostics excluded).
    pub fn items(&self) -> Vec<(&'static str, ResidualSample)> {
        vec![
            ("egorov", self.egorov.worst()),
            ("metric-invariance", self.invariance),
            ("curvature-obstruction", self.curvature_obstruction),
            (
                "canonical-connection",
                self.canonical_identities
                    .pair_sum
                    .merge(self.canonical_identities.distinct_entries),
            ),
            ("tsarev-compatibility", self.tsarev_compatibility),
            ("velocity-admissibility", self.velocity_system),
            ("semi-hamiltonian", self.semi_hamiltonian),
            (
                "special-curvature",
                self.special_curvature
                    .first_kind
                    .merge(self.special_curvature.second_kind),
            ),
        ]
    }

    pub fn worst(&self) -> ResidualSample {
        self.items()
            .into_iter()
            .fold(ResidualSample::ZERO, |acc, (_, s)| acc.merge(s))
    }

    pub fn merge(self, other: ManifoldChecks) -> ManifoldChecks {
        ManifoldChecks {
            egorov: EgorovCheck {
                off_diagonal: self.egorov.off_diagonal.merge(other.egorov.off_diagonal),
                closure: self.egorov.closure.merge(other.egorov.closure),
            },
            invariance: self.invariance.merge(other.invariance),
            curvature_obstruction: self
                .curvature_obstruction
                .merge(other.curvature_obstruction),
            canonical_identities: CanonicalConnectionIdentities {
                pair_sum: self
                    .canonical_identities
                    .pair_sum
                    .merge(other.canonical_identities.pair_sum),
                distinct_entries: self
                    .canonical_identities
                    .distinct_entries
                    .merge(other.canonical_identities.distinct_entries),
            },
            tsarev_compatibility: self.tsarev_compatibility.merge(other.tsarev_compatibility),
            velocity_system: self.velocity_system.merge(other.velocity_system),
            semi_hamiltonian: self.semi_hamiltonian.merge(other.semi_hamiltonian),
            special_curvature: CanonicalCurvatureVanishing {
                first_kind: self
                    .special_curvature
                    .first_kind
                    .merge(other.special_curvature.first_kind),
                second_kind: self
                    .special_curvature
                    .second_kind
                    .merge(other.special_curvature.second_kind),
            },
            curvature_max: self.curvature_max.max(other.curvature_max),
            velocity_gap: self.velocity_gap.min(other.velocity_gap),
        }
    }
}

pub fn check_manifold(m: &PointManifold) -> Result<ManifoldChecks> {
    let n = m.chart.dim();
    let egorov = compat::egorov_check(&m.metric);
    let invariance = compat::invariance_residual(&m.metric, &m.structure)?;
    let curvature_obstruction = compat::curvature_obstruction_residual(&m.structure, &m.gamma);
    let canonical_identities = compat::canonical_connection_identities(&m.gamma);
    let tsarev_compatibility = compat::tsarev_compatibility_residual(&m.gamma);
    let velocity_system = compat::admissible_residual(&m.velocities, &m.structure, &m.gamma);
    let semi_hamiltonian = compat::semi_hamiltonian_residual(&m.velocities)?;
    let special_curvature = compat::canonical_curvature_vanishing(&m.gamma);
    let curvature_max = geometry::curvature(&m.gamma).max_abs();
    let mut velocity_gap = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            velocity_gap =
                velocity_gap.min((m.velocities.v(&[i]) - m.velocities.v(&[j])).abs());
        }
    }
    Ok(ManifoldChecks {
        egorov,
        invariance,
        curvature_obstruction,
        canonical_identities,
        tsarev_compatibility,
        velocity_system,
        semi_hamiltonian,
        special_curvature,
        curvature_max,
        velocity_gap,
    })
}

fn check_tolerance(name: &str) -> Tolerance {
    match name {
        "semi-hamiltonian" => Tolerance::new(1e-7, 1e-7),
        "velocity-admissibility" | "tsarev-compatibility" => Tolerance::new(1e-8, 1e-8),
        _ => Tolerance::default(),
    }
}

/// A verified Riemannian F-manifold structure over a box of base points.
#[derive(Debug, Clone)]
pub struct RiemannianBuild {
    /// The structure at the box center.
    pub manifold: PointManifold,
    /// Checks merged over all sampled base points.
    pub checks: ManifoldChecks,
    pub points_checked: usize,
}

/// Build and verify the induced structure on a box: reduce at the center and
/// at `samples` seeded draws, run the full check battery at each point, and
/// fail loudly on the first violated check.
pub fn build_riemannian_fmanifold(
    lax: &LaxFamily,
    sample_box: &SampleBox,
    twist: Option<&TwistSpec>,
    seed: u64,
    samples: usize,
) -> Result<RiemannianBuild> {
    let n = lax.chart.dim();
    if sample_box.dim() != n {
        return Err(Error::InvalidArgument(format!(
            "sample box dimension {} does not match the chart dimension {n}",
            sample_box.dim()
        )));
    }
    let mut points = vec![sample_box.center()];
    points.extend(sample_box.sample(seed, samples));
    let mut merged: Option<ManifoldChecks> = None;
    let mut center = None;
    for (k, u0) in points.iter().enumerate() {
        let red = reduce(lax, u0, DEFAULT_DEPTH, DEFAULT_MOMENTS, None)?;
        let man = manifold_at(&red, twist)?;
        let checks = check_manifold(&man)?;
        for (name, sample) in checks.items() {
            if !check_tolerance(name).passes(&sample) {
                return Err(Error::domain(
                    "build_riemannian_fmanifold",
                    format!(
                        "check `{name}` failed at sample point {k} (residual {:.3e}, scale {:.3e})",
                        sample.residual, sample.scale
                    ),
                ));
            }
        }
        merged = Some(match merged {
            Some(m) => m.merge(checks),
            None => checks,
        });
        if k == 0 {
            center = Some(man);
        }
    }
    Ok(RiemannianBuild {
        manifold: center.expect("at least the center point is always checked"),
        checks: merged.expect("at least the center point is always checked"),
        points_checked: points.len(),
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsupport::chart;

    fn zak() -> LaxFamily {
        LaxFamily::rational(chart(&["u1", "u2"]), &[("u1", "u2")]).unwrap()
    }

    fn log3() -> LaxFamily {
        LaxFamily::logarithmic(
            chart(&["u1", "u2", "u3"]),
            &[(1.0, "u1"), (1.0, "u2"), (-2.0, "u3")],
        )
        .unwrap()
    }

    fn broken() -> LaxFamily {
        LaxFamily::expression(chart(&["u1", "u2"]), "p + u1/(p - u2) + 0.1*u1^2/p")
            .unwrap()
            .with_seeds(vec![(0.35, 2.0), (-2.0, -0.05)])
    }

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!(
            (a - b).abs() <= tol,
            "{what}: {a} vs {b} (diff {:e})",
            (a - b).abs()
        );
    }

    #[test]
    fn wseries_arithmetic_and_validity() {
        // Geometric reciprocal: 1/(p − b) = Σ b^m w^{m+1}.
        let b = Jet::constant(1, 0, 0.5);
        let pole = WSeries::p_minus(&b, 6);
        let inv = pole.recip().unwrap();
        assert_eq!(inv.lead, 1);
        assert_eq!(inv.top(), 8);
        for m in 0..=7 {
            assert_close(
                inv.coeff(1 + m).value(),
                0.5f64.powi(m as i32),
                1e-15,
                "geometric coefficient",
            );
        }
        // ln(p − b) = −ln w + ln(1 − bw): coefficient of w^m is −b^m/m.
        let lns = pole.ln_series().unwrap();
        assert_close(lns.log_w, -1.0, 0.0, "log_w of ln(p − b)");
        for m in 1..=6 {
            assert_close(
                lns.coeff(m).value(),
                -0.5f64.powi(m as i32) / m as f64,
                1e-15,
                "ln coefficient",
            );
        }
        // Validity bookkeeping under multiplication.
        let prod = inv.mul(&inv).unwrap();
        assert_eq!(prod.lead, 2);
        assert_eq!(prod.top(), 9);
        // exp of a decaying series is fine; exp of p has an essential
        // singularity; ln of a ln-carrying series is rejected.
        let p = WSeries::p_series(1, 0, 6);
        assert!(p.recip().unwrap().entire(UnaryFn::Exp).is_ok());
        assert!(p.entire(UnaryFn::Exp).is_err());
        assert!(lns.ln_series().is_err());
        // Fractional powers need compatible leading exponents.
        let p2 = p.mul(&p).unwrap();
        assert!(p2.powr_series(1, 2).is_ok());
        assert!(p.powr_series(1, 2).is_err());
        // sin²(1/p) + cos²(1/p) = 1 through the whole window.
        let w = p.recip().unwrap();
        let s = w.entire(UnaryFn::Sin).unwrap();
        let c = w.entire(UnaryFn::Cos).unwrap();
        let unit = s.mul(&s).unwrap().add(&c.mul(&c).unwrap());
        assert_close(unit.coeff(0).value(), 1.0, 1e-15, "sin² + cos² constant");
        for m in 1..=unit.top() {
            assert!(unit.coeff(m).value().abs() < 1e-14, "sin² + cos² tail");
        }
        // Division by the zero series is rejected.
        let zero = p.sub(&p);
        assert!(zero.recip().is_err());
    }

    #[test]
    fn moments_closed_forms() {
        // λ = p + u¹/p: A⁰ = u¹ and nothing else.
        let lax = LaxFamily::rational(chart(&["u1", "u2"]), &[("u1", "0")]).unwrap();
        let ms = moments(&lax, &[0.7, 0.3], 2, 3).unwrap();
        let u1 = Jet::variable(2, 2, 0, 0.7);
        assert!(ms[0].sub(&u1).max_abs_coeff() < 1e-14);
        for m in &ms[1..] {
            assert!(m.max_abs_coeff() < 1e-14);
        }

        // λ = p + u¹/(p − u²): A^k = u¹ (u²)^k.
        let ms = moments(&zak(), &[0.7, 0.3], 3, 3).unwrap();
        let u1 = Jet::variable(2, 3, 0, 0.7);
        let u2 = Jet::variable(2, 3, 1, 0.3);
        let mut expect = u1.clone();
        for k in 0..=3 {
            assert!(
                ms[k].sub(&expect).max_abs_coeff() < 1e-13,
                "A^{k} of the two-pole rational family"
            );
            expect = expect.mul(&u2);
        }

        // Logarithmic: A^j = −Σ ε_k b_k^{j+1}/(j+1).
        let u0 = [-1.2, -0.1, 0.9];
        let ms = moments(&log3(), &u0, 2, 2).unwrap();
        let b: Vec<Jet> = (0..3).map(|a| Jet::variable(3, 2, a, u0[a])).collect();
        let eps = [1.0, 1.0, -2.0];
        for j in 0..=2 {
            let mut expect = Jet::constant(3, 2, 0.0);
            for k in 0..3 {
                let mut pow = Jet::constant(3, 2, 1.0);
                for _ in 0..=j {
                    pow = pow.mul(&b[k]);
                }
                expect = expect.add(&pow.scale(-eps[k] / (j as f64 + 1.0)));
            }
            assert!(
                ms[j].sub(&expect).max_abs_coeff() < 1e-12,
                "A^{j} of the logarithmic family"
            );
        }

        // Fractional-power family λ = (p² + u¹)^(1/2):
        // A⁰ = u¹/2, A¹ = 0, A² = −(u¹)²/8, A³ = 0, A⁴ = (u¹)³/16.
        let lax = LaxFamily::expression(chart(&["u1"]), "(p^2 + u1)^(1/2)").unwrap();
        let ms = moments(&lax, &[0.4], 3, 4).unwrap();
        let u1 = Jet::variable(1, 3, 0, 0.4);
        let u1sq = u1.mul(&u1);
        assert!(ms[0].sub(&u1.scale(0.5)).max_abs_coeff() < 1e-14);
        assert!(ms[1].max_abs_coeff() < 1e-14);
        assert!(ms[2].add(&u1sq.scale(0.125)).max_abs_coeff() < 1e-14);
        assert!(ms[3].max_abs_coeff() < 1e-14);
        assert!(ms[4].sub(&u1sq.mul(&u1).scale(1.0 / 16.0)).max_abs_coeff() < 1e-13);

        // Expression and rational assemblies agree coefficient by coefficient.
        let expr = LaxFamily::expression(chart(&["u1", "u2"]), "p + u1/(p - u2)").unwrap();
        let me = moments(&expr, &[0.7, 0.3], 3, 3).unwrap();
        let mr = moments(&zak(), &[0.7, 0.3], 3, 3).unwrap();
        for k in 0..=3 {
            assert!(me[k].sub(&mr[k]).max_abs_coeff() < 1e-13);
        }
    }

    #[test]
    fn moments_reject_asymptotics_violations() {
        let bad = LaxFamily::expression(chart(&["u1", "u2"]), "p + u1/(p - u2) + 0.1*u1^2")
            .unwrap();
        let err = moments(&bad, &[0.25, 0.0], 2, 3).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("p^0"), "should report the offending power: {msg}");

        let err = LaxFamily::logarithmic(chart(&["u1", "u2"]), &[(1.0, "u1"), (-0.5, "u2")])
            .unwrap_err();
        assert!(err.to_string().contains("sum to zero"));

        // The O(1/p) perturbation is a valid family for the moment
        // expansion (it only breaks the reduction identities).
        assert!(moments(&broken(), &[0.25, 0.0], 2, 3).is_ok());
    }

    #[test]
    fn critical_points_closed_forms_and_failures() {
        // v^± = u² ± √u¹.
        let v = critical_points(&zak(), &[0.25, 0.0], None).unwrap();
        assert_close(v[0], -0.5, 1e-12, "v^-");
        assert_close(v[1], 0.5, 1e-12, "v^+");
        let v = critical_points(&zak(), &[0.36, 0.1], None).unwrap();
        assert_close(v[0], -0.5, 1e-12, "v^-");
        assert_close(v[1], 0.7, 1e-12, "v^+");
        // Tiny u¹ keeps the roots resolvable next to the pole.
        let v = critical_points(&zak(), &[1e-8, 0.0], None).unwrap();
        assert_close(v[0], -1e-4, 1e-13, "v^- near pole");
        assert_close(v[1], 1e-4, 1e-13, "v^+ near pole");
        // u¹ < 0: λ_p > 0 everywhere, no real critical points.
        let err = critical_points(&zak(), &[-0.25, 0.0], None).unwrap_err();
        assert!(matches!(err, Error::RootFind(_)), "got {err}");

        // Logarithmic three-branch family: three simple roots, ordered.
        let u0 = [-1.2, -0.1, 0.9];
        let v = critical_points(&log3(), &u0, None).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v[0] < -1.2 && v[1] > -1.2 && v[1] < -0.1 && v[2] > 0.9);
        for &vi in &v {
            let (fp, fpp) = log3().lambda_p_pp(vi, &u0).unwrap();
            assert!(fp.abs() < 1e-10 && fpp.abs() > 1e-3);
        }

        // Expression kind needs seeds; bad seeds are rejected.
        let raw = LaxFamily::expression(chart(&["u1", "u2"]), "p + u1/(p - u2) + 0.1*u1^2/p")
            .unwrap();
        assert!(matches!(
            critical_points(&raw, &[0.25, 0.0], None),
            Err(Error::InvalidArgument(_))
        ));
        let err = critical_points(&raw, &[0.25, 0.0], Some(&[(1.0, 2.0), (-2.0, -1.0)]))
            .unwrap_err();
        assert!(err.to_string().contains("does not bracket"));
        let v = critical_points(&broken(), &[0.25, 0.0], None).unwrap();
        assert_eq!(v.len(), 2);
        assert_close(v[1], 0.50621, 1e-3, "perturbed root");

        // A non-simple critical point is refused.
        let cubic = LaxFamily::expression(chart(&["u1"]), "p + 3*u1/p - u1^2/p^3 + u1^3/(5*p^5)")
            .unwrap();
        let err = critical_points(&cubic, &[0.25], Some(&[(0.3, 0.9)])).unwrap_err();
        assert!(err.to_string().contains("not simple"), "got {err}");
    }

    #[test]
    fn reduction_closed_forms() {
        // r^± = u² ± 2√u¹ at u = (1/4, 0): r = (−1, 1).
        let red = reduce(&zak(), &[0.25, 0.0], 4, 5, None).unwrap();
        assert_close(red.riemann_invariants()[0], -1.0, 1e-12, "r^-");
        assert_close(red.riemann_invariants()[1], 1.0, 1e-12, "r^+");
        assert_close(red.lambda_pp()[0], -4.0, 1e-10, "λ_pp(v^-)");
        assert_close(red.lambda_pp()[1], 4.0, 1e-10, "λ_pp(v^+)");
        // Jacobian rows follow the ascending critical points:
        // ∂r^∓/∂(u¹,u²) = (∓1/√u¹, 1).
        let j = red.jacobian();
        assert_close(j[0], -2.0, 1e-10, "∂r1/∂u1");
        assert_close(j[1], 1.0, 1e-10, "∂r1/∂u2");
        assert_close(j[2], 2.0, 1e-10, "∂r2/∂u1");
        assert_close(j[3], 1.0, 1e-10, "∂r2/∂u2");

        // A⁰(r) = (r² − r¹)²/16: value, gradient and Hessian coefficients.
        let a0 = red.moment_r(0);
        assert_close(a0.value(), 0.25, 1e-12, "A⁰");
        assert_close(a0.d1(0), -0.25, 1e-10, "∂A⁰/∂r1");
        assert_close(a0.d1(1), 0.25, 1e-10, "∂A⁰/∂r2");
        assert_close(a0.coeff(&[2, 0]), 1.0 / 16.0, 1e-10, "A⁰ r1² coefficient");
        assert_close(a0.coeff(&[1, 1]), -1.0 / 8.0, 1e-10, "A⁰ r1r2 coefficient");
        assert_close(a0.coeff(&[0, 2]), 1.0 / 16.0, 1e-10, "A⁰ r2² coefficient");

        // v^∓(r) = (3r¹ + r²)/4 and (r¹ + 3r²)/4.
        let v0 = red.velocity_r(0);
        let v1 = red.velocity_r(1);
        assert_close(v0.value(), -0.5, 1e-12, "v^-(r)");
        assert_close(v0.d1(0), 0.75, 1e-10, "∂v^-/∂r1");
        assert_close(v0.d1(1), 0.25, 1e-10, "∂v^-/∂r2");
        assert_close(v1.d1(0), 0.25, 1e-10, "∂v^+/∂r1");
        assert_close(v1.d1(1), 0.75, 1e-10, "∂v^+/∂r2");

        // Moment chain k = 0 closed form: ∂_i A⁰ · v^i = ∂_i A¹.
        assert_close(
            a0.d1(0) * red.critical_points()[0],
            red.moment_r(1).d1(0),
            1e-10,
            "chain k = 0",
        );

        // Chart inversion round trip: u(r) has the inverse Jacobian.
        let u_r = red.u_of_r();
        assert_close(u_r[0].d1(0), -0.25, 1e-10, "∂u1/∂r1");
        assert_close(u_r[0].d1(1), 0.25, 1e-10, "∂u1/∂r2");
        assert_close(u_r[1].d1(0), 0.5, 1e-10, "∂u2/∂r1");
        assert_close(u_r[1].d1(1), 0.5, 1e-10, "∂u2/∂r2");

        let err = reduce(&zak(), &[0.25, 0.0], 2, 5, None).unwrap_err();
        assert!(err.to_string().contains("depth"));
    }

    #[test]
    fn consistency_residuals_hold_on_exact_reductions() {
        let tol = Tolerance::new(1e-9, 1e-9);
        let chain_tol = Tolerance::new(1e-8, 1e-8);
        for (lax, u0, p0) in [
            (zak(), vec![0.3, -0.2], 2.0),
            (zak(), vec![0.25, 0.0], 0.17),
            (log3(), vec![-1.2, -0.1, 0.9], 2.5),
        ] {
            let red = reduce(&lax, &u0, 4, 5, None).unwrap();
            let lw = loewner_residual(&lax, &red, p0).unwrap();
            assert!(tol.passes(&lw), "loewner: {lw:?}");
            let gt = gibbons_tsarev_residual(&red);
            assert!(chain_tol.passes(&gt.velocity), "gt velocity: {gt:?}");
            assert!(chain_tol.passes(&gt.potential), "gt potential: {gt:?}");
            let lpp = lambda_pp_identity_residual(&red).unwrap();
            assert!(tol.passes(&lpp), "λ_pp identity: {lpp:?}");
            let chain = moment_chain_residual(&red, 3).unwrap();
            assert!(chain_tol.passes(&chain), "moment chain: {chain:?}");
        }
        // p0 at a critical point is refused.
        let red = reduce(&zak(), &[0.25, 0.0], 4, 5, None).unwrap();
        assert!(loewner_residual(&zak(), &red, 0.5).is_err());
        // The chain beyond the stored moments is refused.
        assert!(moment_chain_residual(&red, 5).is_err());
    }

    #[test]
    fn consistency_residuals_detect_a_broken_family() {
        let lax = broken();
        let red = reduce(&lax, &[0.25, 0.3], 4, 5, None).unwrap();
        let lw = loewner_residual(&lax, &red, 2.0).unwrap();
        assert!(
            lw.residual > 1e-4 * lw.scale.max(1.0),
            "loewner should fail: {lw:?}"
        );
        let gt = gibbons_tsarev_residual(&red);
        assert!(gt.worst().residual > 1e-4, "gt should fail: {gt:?}");
        let lpp = lambda_pp_identity_residual(&red).unwrap();
        assert!(lpp.residual > 1e-4, "λ_pp identity should fail: {lpp:?}");
        let chain = moment_chain_residual(&red, 3).unwrap();
        assert!(chain.residual > 1e-4, "chain should fail: {chain:?}");

        // On the pole-collision locus u² = 0 the two poles merge and the
        // family degenerates into an exact single-pole reduction: there the
        // identities hold and a counter-fixture probe would be blind.
        let red = reduce(&lax, &[0.25, 0.0], 4, 5, None).unwrap();
        let lw = loewner_residual(&lax, &red, 2.0).unwrap();
        assert!(lw.residual < 1e-9, "degenerate locus is exact: {lw:?}");
    }

    #[test]
    fn residue_pairing_closed_forms() {
        let lax = zak();
        let red = reduce(&lax, &[0.25, 0.0], 4, 5, None).unwrap();
        let pr = residue_pairing(&lax, &red, None).unwrap();
        // g in Riemann invariants: diag(∂_i A⁰) = diag(−1/4, 1/4).
        assert_close(pr.g_r(0, 0), -0.25, 1e-10, "g_r 11");
        assert_close(pr.g_r(1, 1), 0.25, 1e-10, "g_r 22");
        assert_close(pr.g_r(0, 1), 0.0, 1e-10, "g_r 12");
        // c in Riemann invariants: ∂_i A⁰ on the diagonal triple.
        assert_close(pr.c_r(0, 0, 0), -0.25, 1e-10, "c_r 111");
        assert_close(pr.c_r(1, 1, 1), 0.25, 1e-10, "c_r 222");
        assert_close(pr.c_r(0, 1, 1), 0.0, 1e-10, "c_r 122");
        // In the u-chart the same metric is the antidiagonal pairing.
        assert_close(pr.g_u(0, 0), 0.0, 1e-10, "g_u 11");
        assert_close(pr.g_u(0, 1), 1.0, 1e-10, "g_u 12");
        assert_close(pr.g_u(1, 0), 1.0, 1e-10, "g_u 21");
        assert_close(pr.g_u(1, 1), 0.0, 1e-10, "g_u 22");

        let checks = pairing_checks(&red, &pr, None).unwrap();
        let tol = Tolerance::new(1e-9, 1e-9);
        assert!(tol.passes(&checks.diagonal), "{:?}", checks.diagonal);
        assert!(tol.passes(&checks.canonical), "{:?}", checks.canonical);
        let tol8 = Tolerance::new(1e-8, 1e-8);
        assert!(tol8.passes(&checks.coherence), "{:?}", checks.coherence);

        // A trivial twist must reproduce the untwisted pairing.
        let unit = TwistSpec::parse(&["1", "1"]).unwrap();
        let pr1 = residue_pairing(&lax, &red, Some(&unit)).unwrap();
        for (a, b) in pr.g_r_flat().iter().zip(pr1.g_r_flat()) {
            assert_close(*a, *b, 1e-14, "unit twist g");
        }
        for (a, b) in pr.c_u_flat().iter().zip(pr1.c_u_flat()) {
            assert_close(*a, *b, 1e-14, "unit twist c");
        }

        // Twisted pairing: φ = (s, 1) weights the first summand by r¹ = −1.
        let twist = TwistSpec::parse(&["s", "1"]).unwrap();
        let prt = residue_pairing(&lax, &red, Some(&twist)).unwrap();
        assert_close(prt.g_r(0, 0), 0.25, 1e-10, "twisted g_r 11");
        assert_close(prt.g_r(1, 1), 0.25, 1e-10, "twisted g_r 22");
        assert_close(prt.c_r(0, 0, 0), -0.25, 1e-10, "twisted c_r 111");
        let checks = pairing_checks(&red, &prt, Some(&twist)).unwrap();
        assert!(tol.passes(&checks.diagonal), "{:?}", checks.diagonal);
        assert!(tol.passes(&checks.canonical), "{:?}", checks.canonical);
        assert!(tol8.passes(&checks.coherence), "{:?}", checks.coherence);

        // Pairing checks also hold on the non-flat logarithmic reduction.
        let lax = log3();
        let red = reduce(&lax, &[-1.2, -0.1, 0.9], 4, 5, None).unwrap();
        let pr = residue_pairing(&lax, &red, None).unwrap();
        let checks = pairing_checks(&red, &pr, None).unwrap();
        assert!(tol.passes(&checks.diagonal), "{:?}", checks.diagonal);
        assert!(tol.passes(&checks.canonical), "{:?}", checks.canonical);
        assert!(tol8.passes(&checks.coherence), "{:?}", checks.coherence);
    }

    #[test]
    fn manifold_pipeline_flat_case() {
        let red = reduce(&zak(), &[0.25, 0.0], 4, 5, None).unwrap();
        let man = manifold_at(&red, None).unwrap();
        assert_eq!(man.chart().names(), ["r1", "r2"]);
        assert_close(man.metric().v(&[0, 0]), -0.25, 1e-10, "g 11");
        assert_close(man.metric().v(&[1, 1]), 0.25, 1e-10, "g 22");
        // Egorov connection of A⁰ = (r² − r¹)²/16: Γ¹_{12} = 1/4.
        assert_close(man.gamma().v(&[0, 0, 1]), 0.25, 1e-9, "Γ¹_12");
        let checks = check_manifold(&man).unwrap();
        for (name, sample) in checks.items() {
            assert!(
                check_tolerance(name).passes(&sample),
                "{name} failed: {sample:?}"
            );
        }
        // The two-pole rational reduction is flat.
        assert!(checks.curvature_max < 1e-9, "curvature {}", checks.curvature_max);
        assert_close(checks.velocity_gap, 1.0, 1e-10, "velocity gap");

        // The velocities solve the canonical-chart system with these Γ:
        // recover them from their boundary data.
        let red = reduce(&zak(), &[0.25, 0.0], 5, 5, None).unwrap();
        let man = manifold_at(&red, None).unwrap();
        let k = 3;
        let boundary: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                (0..=k)
                    .map(|m| {
                        let mut ix = [0u8; 2];
                        ix[i] = m as u8;
                        red.velocity_r(i).coeff(&ix)
                    })
                    .collect()
            })
            .collect();
        let sol =
            compat::tsarev_solve(man.chart(), man.gamma(), man.base(), &boundary, k).unwrap();
        for i in 0..2 {
            let got = sol.series.component(&[i]);
            let want = red.velocity_r(i).truncate(k);
            assert!(
                got.sub(&want).max_abs_coeff() < 1e-7,
                "velocity recovery component {i}"
            );
        }
    }

    #[test]
    fn manifold_pipeline_logarithmic_case_is_flat() {
        // Logarithmic families, like rational ones, induce a flat residue
        // metric (a known property of these explicitly solvable classes);
        // the full check battery passes and the curvature vanishes.
        for u0 in [[-1.2, -0.1, 0.9], [-1.0, 0.2, 1.4]] {
            let red = reduce(&log3(), &u0, 4, 5, None).unwrap();
            let man = manifold_at(&red, None).unwrap();
            let checks = check_manifold(&man).unwrap();
            for (name, sample) in checks.items() {
                assert!(
                    check_tolerance(name).passes(&sample),
                    "{name} failed: {sample:?}"
                );
            }
            assert!(
                checks.curvature_max < 1e-9,
                "logarithmic reduction should be flat, got curvature {}",
                checks.curvature_max
            );
        }
    }

    #[test]
    fn manifold_pipeline_twisted_nonflat_case() {
        // Unequal twist weights break the flatness balance while keeping
        // every compatibility condition: the genuinely non-flat Riemannian
        // F-manifolds live in the twisted family.
        let red = reduce(&log3(), &[-1.2, -0.1, 0.9], 4, 5, None).unwrap();
        let twist = TwistSpec::parse(&["exp(s)", "1", "1"]).unwrap();
        let man = manifold_at(&red, Some(&twist)).unwrap();
        let checks = check_manifold(&man).unwrap();
        for (name, sample) in checks.items() {
            assert!(
                check_tolerance(name).passes(&sample),
                "twisted {name} failed: {sample:?}"
            );
        }
        assert!(
            checks.curvature_max > 1e-4,
            "expected visible curvature in the twisted structure, got {}",
            checks.curvature_max
        );
    }

    #[test]
    fn manifold_pipeline_twisted_case() {
        let red = reduce(&zak(), &[0.25, 0.0], 4, 5, None).unwrap();
        let twist = TwistSpec::parse(&["s", "1"]).unwrap();
        let man = manifold_at(&red, Some(&twist)).unwrap();
        assert_eq!(man.chart().names(), ["s1", "s2"]);
        assert!(man.twisted());
        // g_{s¹s¹} = ∂_1 A⁰/φ_1 = (−1/4)/(−1) = 1/4 at the base point.
        assert_close(man.metric().v(&[0, 0]), 0.25, 1e-10, "twisted g 11");
        assert_close(man.metric().v(&[1, 1]), 0.25, 1e-10, "twisted g 22");
        let checks = check_manifold(&man).unwrap();
        for (name, sample) in checks.items() {
            assert!(
                check_tolerance(name).passes(&sample),
                "twisted {name} failed: {sample:?}"
            );
        }
        // A vanishing weight at the base point is refused.
        let bad = TwistSpec::parse(&["s + 1", "1"]).unwrap();
        assert!(manifold_at(&red, Some(&bad)).is_err());
    }

    #[test]
    fn build_verifies_over_a_box() {
        let sb = SampleBox::new(vec![(0.2, 0.3), (-0.1, 0.1)]).unwrap();
        let built = build_riemannian_fmanifold(&zak(), &sb, None, 42, 4).unwrap();
        assert_eq!(built.points_checked, 5);
        assert!(built.checks.curvature_max < 1e-9);
        assert!(built.manifold.chart().names() == ["r1", "r2"]);

        let twist = TwistSpec::parse(&["s", "1"]).unwrap();
        let built = build_riemannian_fmanifold(&zak(), &sb, Some(&twist), 7, 3);
        assert!(built.is_ok(), "twisted build: {:?}", built.err());

        // A box dipping into u¹ < 0 loses the real critical points.
        let sb = SampleBox::new(vec![(-0.3, -0.2), (-0.1, 0.1)]).unwrap();
        assert!(build_riemannian_fmanifold(&zak(), &sb, None, 42, 2).is_err());
    }

    #[test]
    fn u_chart_structure_is_an_integrable_product() {
        // Pushing the canonical r-chart product back to the u-chart must
        // give a commutative associative product satisfying the six-term
        // integrability identity, with vanishing Haantjes torsion for
        // constant directions; on the two-pole family the closed form
        // c^a_{bc} follows from r^± = u² ± 2√u¹.
        use crate::algebra;
        for (lax, u0) in [
            (zak(), vec![0.25, 0.1]),
            (log3(), vec![-1.2, -0.1, 0.9]),
        ] {
            let red = riemann_invariants(&lax, &u0).unwrap();
            let c = u_chart_structure(&red, 2).unwrap();
            let a = algebra::associativity(&c);
            assert!(a.residual <= 1e-11 * a.scale.max(1.0), "{a:?}");
            assert_eq!(algebra::commutativity(&c).residual, 0.0);
            let hm = algebra::hertling_manin(&c);
            assert!(hm.residual <= 1e-9 * hm.scale.max(1.0), "{hm:?}");
            let v = algebra::v_endomorphism(&c, &crate::chart::unit_draws(7, red.n()));
            let h = algebra::haantjes(&v);
            assert!(h.residual <= 1e-9 * h.scale.max(1.0), "{h:?}");
        }

        // Closed form on the two-pole family: with r^± = u² ± 2√u¹ the push
        // of the canonical product gives c^1_{11} = u¹, c^1_{22} = 1/4·…;
        // verify instead through the equivalent identity J·c_u = c_r·(J⊗J),
        // i.e. Σ_{bc} ∂_a r^i c^a_{bc} X^b Y^c = (∂_b r^i X^b)(∂_c r^i Y^c)
        // for the canonical product, at random directions.
        let red = riemann_invariants(&zak(), &[0.25, 0.1]).unwrap();
        let c = u_chart_structure(&red, 1).unwrap();
        let n = red.n();
        let x = crate::chart::unit_draws(11, n);
        let y = crate::chart::unit_draws(12, n);
        for i in 0..n {
            let mut lhs = 0.0;
            let mut rx = 0.0;
            let mut ry = 0.0;
            for b in 0..n {
                rx += red.jacobian()[i * n + b] * x[b];
                ry += red.jacobian()[i * n + b] * y[b];
                for cc in 0..n {
                    for a in 0..n {
                        lhs += red.jacobian()[i * n + a] * c.v(&[a, b, cc]) * x[b] * y[cc];
                    }
                }
            }
            assert_close(lhs, rx * ry, 1e-10, "pushed product, invariant i");
        }
    }
}
