//! The `fman-spec/1` manifold description format.
//!
//! A spec file is a single TOML document declaring a chart with a sampling
//! box and, optionally: structure constants `c^i_{jk}` (sparse entries,
//! symmetric in the two lower indices), a metric `g_{ij}`, explicit
//! connection coefficients `Γ^i_{jk}`, a Lax family for dispersionless-KP
//! reductions, per-axis twist weights, named vector fields, parameter
//! values, tolerances, and sampling controls. All indices in the file are
//! 1-based; all expressions are parsed over the declared chart.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::benney::{LaxFamily, TwistSpec};
use crate::chart::{Chart, SampleBox};
use crate::error::{Error, Result};
use crate::expr::{ExprContext, FieldExpr};
use crate::geometry::Connection;
use crate::residual::Tolerance;
use crate::tensor::{ChartTensor, TensorEntry, Valence};

/// Format tag required in the `format` key of every spec file.
pub const SPEC_FORMAT: &str = "fman-spec/1";

/// Default sampling seed when the file does not pin one.
pub const DEFAULT_SEED: u64 = 42;
/// Default number of sample points.
pub const DEFAULT_SAMPLES: usize = 32;

// ---------------------------------------------------------------------------
// Raw serde mirror of the document.
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    format: String,
    name: String,
    chart: RawChart,
    #[serde(default)]
    sampling: Option<RawSampling>,
    #[serde(default)]
    tolerances: Option<RawTolerances>,
    #[serde(default)]
    params: HashMap<String, f64>,
    #[serde(default)]
    structure: Vec<RawTriple>,
    #[serde(default)]
    metric: Vec<RawPair>,
    #[serde(default)]
    connection: Vec<RawTriple>,
    #[serde(default)]
    field: Vec<RawField>,
    #[serde(default)]
    lax: Option<RawLax>,
    #[serde(default)]
    twist: Option<RawTwist>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    coords: Vec<String>,
    #[serde(rename = "box")]
    sample_box: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    seed: Option<u64>,
    samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    abs: Option<f64>,
    rel: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTriple {
    i: i64,
    j: i64,
    k: i64,
    expr: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    i: i64,
    j: i64,
    expr: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    name: String,
    components: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLax {
    kind: String,
    /// Rational kind: one `[numerator, pole]` expression pair per term.
    #[serde(default)]
    terms: Vec<Vec<String>>,
    /// Logarithmic kind: branch weights ε_i (must sum to zero).
    #[serde(default)]
    weights: Vec<f64>,
    /// Logarithmic kind: branch-point expressions, one per weight.
    #[serde(default)]
    branch_points: Vec<String>,
    /// Expression kind: λ(p, u) as a single expression over the chart and `p`.
    #[serde(default)]
    expr: Option<String>,
    /// Optional critical-point seed brackets `[lo, hi]`.
    #[serde(default)]
    seeds: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTwist {
    /// One weight expression per coordinate, in the single variable `s`.
    phis: Vec<String>,
}

// ---------------------------------------------------------------------------
// Validated spec.
// ---------------------------------------------------------------------------

/// A fully validated manifold description.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    pub name: String,
    pub chart: Chart,
    pub sample_box: SampleBox,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: Tolerance,
    pub params: HashMap<String, f64>,
    /// Structure constants `c^i_{jk}`, symmetrized in the lower pair.
    pub structure: Option<ChartTensor>,
    /// Metric `g_{ij}`, symmetrized.
    pub metric: Option<ChartTensor>,
    /// Explicit connection coefficients `Γ^i_{jk}` (not symmetrized; the
    /// file states every nonzero component).
    pub connection_entries: Option<ChartTensor>,
    /// Named vector fields.
    pub fields: Vec<(String, ChartTensor)>,
    pub lax: Option<LaxFamily>,
    pub twist: Option<TwistSpec>,
    /// Non-fatal findings from validation (e.g. conflicting symmetrized
    /// entries), surfaced into reports.
    pub warnings: Vec<String>,
}

impl ManifoldSpec {
    /// Parse and validate a spec document.
    pub fn from_toml_str(src: &str) -> Result<ManifoldSpec> {
        let raw: RawSpec = toml::from_str(src)
            .map_err(|e| Error::spec(format!("spec file: {}", first_line_block(&e.to_string()))))?;
        validate(raw)
    }

    /// Read and validate a spec file from disk.
    pub fn load(path: &Path) -> Result<ManifoldSpec> {
        let src = std::fs::read_to_string(path)?;
        ManifoldSpec::from_toml_str(&src)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// The connection declared by the spec: explicit coefficients if given,
    /// else the Levi-Civita connection of the declared metric, else the
    /// trivial affine connection of the chart.
    pub fn nabla(&self) -> Connection {
        if let Some(gamma) = &self.connection_entries {
            Connection::Expressions {
                gamma: gamma.clone(),
            }
        } else if let Some(g) = &self.metric {
            Connection::LeviCivita { metric: g.clone() }
        } else {
            Connection::Zero {
                dim: self.chart.dim(),
            }
        }
    }

    /// Whether a connection is actually declared (explicitly or through a
    /// metric), as opposed to defaulting to the trivial one.
    pub fn declares_connection(&self) -> bool {
        self.connection_entries.is_some() || self.metric.is_some()
    }

    /// Whether every declared nonzero structure component has `i = j = k`
    /// (the sparsity pattern of canonical coordinates).
    pub fn structure_is_canonical_pattern(&self) -> bool {
        let Some(c) = &self.structure else {
            return false;
        };
        let n = c.n();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if (i != j || j != k) && !is_zero_expr(c.component(&[i, j, k])) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// A named field declared by the spec.
    pub fn field(&self, name: &str) -> Option<&ChartTensor> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }
}

fn is_zero_expr(e: &FieldExpr) -> bool {
    matches!(e.node(), crate::expr::Node::Const(v) if *v == 0.0)
}

/// TOML errors render as a multi-line block with a caret span; keep the
/// message plus the location line so the error stays one level deep.
fn first_line_block(msg: &str) -> String {
    let lines: Vec<&str> = msg.lines().filter(|l| !l.trim().is_empty()).collect();
    lines.join("; ")
}

fn validate(raw: RawSpec) -> Result<ManifoldSpec> {
    if raw.format != SPEC_FORMAT {
        return Err(Error::spec(format!(
            "format: expected `{SPEC_FORMAT}`, found `{}`",
            raw.format
        )));
    }
    if raw.name.trim().is_empty() {
        return Err(Error::spec("name: must be nonempty"));
    }
    let chart = Chart::new(raw.chart.coords.clone())
        .map_err(|e| Error::spec(format!("chart.coords: {e}")))?;
    let n = chart.dim();

    if raw.chart.sample_box.len() != n {
        return Err(Error::spec(format!(
            "chart.box: {} intervals for {} coordinates",
            raw.chart.sample_box.len(),
            n
        )));
    }
    let mut ranges = Vec::with_capacity(n);
    for (axis, iv) in raw.chart.sample_box.iter().enumerate() {
        if iv.len() != 2 {
            return Err(Error::spec(format!(
                "chart.box[{}]: expected [lo, hi], found {} entries",
                axis + 1,
                iv.len()
            )));
        }
        ranges.push((iv[0], iv[1]));
    }
    let sample_box =
        SampleBox::new(ranges).map_err(|e| Error::spec(format!("chart.box: {e}")))?;

    let mut params: Vec<String> = raw.params.keys().cloned().collect();
    params.sort();
    for p in &params {
        if chart.names().contains(p) {
            return Err(Error::spec(format!(
                "params.{p}: shadows a chart coordinate"
            )));
        }
    }
    let ctx = ExprContext {
        coords: chart.names().to_vec(),
        params: params.clone(),
        allow_lax_var: false,
    };

    let mut warnings = Vec::new();

    let structure = build_tensor(
        &chart,
        &ctx,
        Valence::PRODUCT,
        "structure",
        &raw.structure,
        true,
        &mut warnings,
    )?;
    let metric = build_tensor_pairs(&chart, &ctx, "metric", &raw.metric, &mut warnings)?;
    let connection = build_tensor(
        &chart,
        &ctx,
        Valence::PRODUCT,
        "connection",
        &raw.connection,
        false,
        &mut warnings,
    )?;

    let mut fields = Vec::new();
    for (fi, f) in raw.field.iter().enumerate() {
        if f.components.len() != n {
            return Err(Error::spec(format!(
                "field[{fi}].components: {} expressions for dimension {}",
                f.components.len(),
                n
            )));
        }
        let entries = f
            .components
            .iter()
            .enumerate()
            .map(|(i, src)| {
                let expr = FieldExpr::parse(src, &ctx).map_err(|e| {
                    Error::spec(format!("field[{fi}].components[{}]: {e}", i + 1))
                })?;
                Ok(TensorEntry {
                    idx: vec![i],
                    expr,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (t, _) = ChartTensor::from_entries(chart.clone(), Valence::VECTOR, &entries, false)?;
        if fields.iter().any(|(name, _)| name == &f.name) {
            return Err(Error::spec(format!(
                "field[{fi}].name: duplicate field name `{}`",
                f.name
            )));
        }
        fields.push((f.name.clone(), t));
    }

    let lax = match &raw.lax {
        None => None,
        Some(l) => Some(build_lax(&chart, &raw.params, l)?),
    };

    let twist = match &raw.twist {
        None => None,
        Some(t) => {
            if t.phis.len() != n {
                return Err(Error::spec(format!(
                    "twist.phis: {} weights for dimension {}",
                    t.phis.len(),
                    n
                )));
            }
            let srcs: Vec<&str> = t.phis.iter().map(|s| s.as_str()).collect();
            Some(
                TwistSpec::parse(&srcs)
                    .map_err(|e| Error::spec(format!("twist.phis: {e}")))?,
            )
        }
    };

    let (seed, samples) = match &raw.sampling {
        Some(s) => (
            s.seed.unwrap_or(DEFAULT_SEED),
            s.samples.unwrap_or(DEFAULT_SAMPLES),
        ),
        None => (DEFAULT_SEED, DEFAULT_SAMPLES),
    };
    if samples == 0 {
        return Err(Error::spec("sampling.samples: must be positive"));
    }
    let tolerance = match &raw.tolerances {
        Some(t) => {
            let d = Tolerance::default();
            let tol = Tolerance::new(t.abs.unwrap_or(d.abs), t.rel.unwrap_or(d.rel));
            if !(tol.abs > 0.0 && tol.rel >= 0.0 && tol.abs.is_finite() && tol.rel.is_finite()) {
                return Err(Error::spec(
                    "tolerances: abs must be positive and finite, rel nonnegative and finite",
                ));
            }
            tol
        }
        None => Tolerance::default(),
    };

    Ok(ManifoldSpec {
        name: raw.name,
        chart,
        sample_box,
        seed,
        samples,
        tolerance,
        params: raw.params,
        structure,
        metric,
        connection_entries: connection,
        fields,
        lax,
        twist,
        warnings,
    })
}

/// Convert one 1-based file index to 0-based, reporting the field path.
fn lower_index(v: i64, n: usize, path: &str) -> Result<usize> {
    if v < 1 || v as usize > n {
        return Err(Error::spec(format!(
            "{path}: index {v} out of range 1..{n}"
        )));
    }
    Ok(v as usize - 1)
}

fn build_tensor(
    chart: &Chart,
    ctx: &ExprContext,
    valence: Valence,
    section: &str,
    entries: &[RawTriple],
    symmetrize: bool,
    warnings: &mut Vec<String>,
) -> Result<Option<ChartTensor>> {
    if entries.is_empty() {
        return Ok(None);
    }
    let n = chart.dim();
    let parsed = entries
        .iter()
        .enumerate()
        .map(|(e, t)| {
            let i = lower_index(t.i, n, &format!("{section}[{e}].i"))?;
            let j = lower_index(t.j, n, &format!("{section}[{e}].j"))?;
            let k = lower_index(t.k, n, &format!("{section}[{e}].k"))?;
            let expr = FieldExpr::parse(&t.expr, ctx)
                .map_err(|err| Error::spec(format!("{section}[{e}].expr: {err}")))?;
            Ok(TensorEntry {
                idx: vec![i, j, k],
                expr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (tensor, mut warns) = ChartTensor::from_entries(chart.clone(), valence, &parsed, symmetrize)?;
    for w in warns.drain(..) {
        warnings.push(format!("{section}: {w}"));
    }
    Ok(Some(tensor))
}

fn build_tensor_pairs(
    chart: &Chart,
    ctx: &ExprContext,
    section: &str,
    entries: &[RawPair],
    warnings: &mut Vec<String>,
) -> Result<Option<ChartTensor>> {
    if entries.is_empty() {
        return Ok(None);
    }
    let n = chart.dim();
    let parsed = entries
        .iter()
        .enumerate()
        .map(|(e, t)| {
            let i = lower_index(t.i, n, &format!("{section}[{e}].i"))?;
            let j = lower_index(t.j, n, &format!("{section}[{e}].j"))?;
            let expr = FieldExpr::parse(&t.expr, ctx)
                .map_err(|err| Error::spec(format!("{section}[{e}].expr: {err}")))?;
            Ok(TensorEntry {
                idx: vec![i, j],
                expr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (tensor, mut warns) =
        ChartTensor::from_entries(chart.clone(), Valence::METRIC, &parsed, true)?;
    for w in warns.drain(..) {
        warnings.push(format!("{section}: {w}"));
    }
    Ok(Some(tensor))
}

fn build_lax(chart: &Chart, params: &HashMap<String, f64>, raw: &RawLax) -> Result<LaxFamily> {
    let mut seeds = Vec::with_capacity(raw.seeds.len());
    for (i, s) in raw.seeds.iter().enumerate() {
        if s.len() != 2 {
            return Err(Error::spec(format!(
                "lax.seeds[{i}]: expected [lo, hi], found {} entries",
                s.len()
            )));
        }
        seeds.push((s[0], s[1]));
    }
    let fam = match raw.kind.as_str() {
        "rational" => {
            if raw.terms.is_empty() {
                return Err(Error::spec("lax.terms: rational kind needs at least one [numerator, pole] pair"));
            }
            let mut pairs = Vec::with_capacity(raw.terms.len());
            for (i, t) in raw.terms.iter().enumerate() {
                if t.len() != 2 {
                    return Err(Error::spec(format!(
                        "lax.terms[{i}]: expected [numerator, pole], found {} entries",
                        t.len()
                    )));
                }
                pairs.push((t[0].as_str(), t[1].as_str()));
            }
            LaxFamily::rational(chart.clone(), &pairs)
                .map_err(|e| Error::spec(format!("lax: {e}")))?
        }
        "logarithmic" => {
            if raw.weights.len() != raw.branch_points.len() || raw.weights.is_empty() {
                return Err(Error::spec(format!(
                    "lax: logarithmic kind needs matching nonempty weights ({}) and branch_points ({})",
                    raw.weights.len(),
                    raw.branch_points.len()
                )));
            }
            let terms: Vec<(f64, &str)> = raw
                .weights
                .iter()
                .zip(&raw.branch_points)
                .map(|(&w, b)| (w, b.as_str()))
                .collect();
            LaxFamily::logarithmic(chart.clone(), &terms)
                .map_err(|e| Error::spec(format!("lax: {e}")))?
        }
        "expression" => {
            let src = raw.expr.as_deref().ok_or_else(|| {
                Error::spec("lax.expr: expression kind needs a λ(p, u) expression")
            })?;
            LaxFamily::expression(chart.clone(), src)
                .map_err(|e| Error::spec(format!("lax.expr: {e}")))?
        }
        other => {
            return Err(Error::spec(format!(
                "lax.kind: expected `rational`, `logarithmic`, or `expression`, found `{other}`"
            )));
        }
    };
    let fam = if params.is_empty() {
        fam
    } else {
        fam.with_params(params.clone())
    };
    Ok(if seeds.is_empty() {
        fam
    } else {
        fam.with_seeds(seeds)
    })
}
