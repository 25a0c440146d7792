//! Shared builders for unit tests.

use std::collections::HashMap;

use crate::chart::Chart;
use crate::expr::{ExprContext, FieldExpr};
use crate::tensor::{ChartTensor, EvalTensor, TensorEntry, Valence};

/// Evaluate with no parameters, panicking on error.
pub fn ev(t: &ChartTensor, x: &[f64], order: usize) -> EvalTensor {
    t.eval(x, order, &HashMap::new()).unwrap()
}

pub fn chart(names: &[&str]) -> Chart {
    Chart::new(names.iter().map(|s| s.to_string()).collect()).unwrap()
}

/// Build a tensor from 0-based sparse entries of expression source text.
pub fn tensor(
    names: &[&str],
    valence: Valence,
    entries: &[(&[usize], &str)],
    symmetrize: bool,
) -> ChartTensor {
    let ch = chart(names);
    let ctx = ExprContext::chart(ch.names());
    let es: Vec<TensorEntry> = entries
        .iter()
        .map(|(idx, s)| TensorEntry {
            idx: idx.to_vec(),
            expr: FieldExpr::parse(s, &ctx).unwrap(),
        })
        .collect();
    ChartTensor::from_entries(ch, valence, &es, symmetrize)
        .unwrap()
        .0
}

/// Structure constants of the 2d potential example: F = ½(u¹)²u² + (u²)⁴/24
/// with the antidiagonal flat pairing, giving c¹₁₁ = 1, c¹₂₂ = u², c²₁₂ = 1.
pub fn potential2_c() -> ChartTensor {
    tensor(
        &["u1", "u2"],
        Valence::PRODUCT,
        &[(&[0, 0, 0], "1"), (&[0, 1, 1], "u2"), (&[1, 0, 1], "1")],
        true,
    )
}

/// The antidiagonal flat metric paired with [`potential2_c`].
pub fn potential2_metric() -> ChartTensor {
    tensor(
        &["u1", "u2"],
        Valence::METRIC,
        &[(&[0, 1], "1")],
        true,
    )
}

/// 3d commutative associative structure constants that fail the first-order
/// integrability identity: c¹₁₁ = 1, c¹₂₂ = u² + (u¹)² + u²u³, c²₁₂ = 1,
/// c³₃₃ = 1. The u¹- and u³-dependence of c¹₂₂ makes both the six-term
/// identity and the Haantjes torsion of generic induced endomorphisms
/// nonzero.
pub fn broken_hm_c() -> ChartTensor {
    tensor(
        &["u1", "u2", "u3"],
        Valence::PRODUCT,
        &[
            (&[0, 0, 0], "1"),
            (&[0, 1, 1], "u2 + u1^2 + u2*u3"),
            (&[1, 0, 1], "1"),
            (&[2, 2, 2], "1"),
        ],
        true,
    )
}

/// The flat Egorov metric of the 2-component reduction of the Benney chain
/// in Riemann invariants: g = diag((r1−r2)/8, (r2−r1)/8).
pub fn zakharov_r_metric() -> ChartTensor {
    tensor(
        &["r1", "r2"],
        Valence::METRIC,
        &[(&[0, 0], "(r1 - r2)/8"), (&[1, 1], "(r2 - r1)/8")],
        false,
    )
}

/// Conformal diagonal metric g_ii = (r1 + ⋯ + rn)^−2: an Egorov metric of
/// constant negative curvature that satisfies every canonical-chart
/// compatibility condition while being non-flat.
pub fn hyperbolic_metric(n: usize) -> ChartTensor {
    let names: Vec<String> = (1..=n).map(|i| format!("r{i}")).collect();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let sum = names.join(" + ");
    let src = format!("1/({sum})^2");
    let entries: Vec<(Vec<usize>, String)> =
        (0..n).map(|i| (vec![i, i], src.clone())).collect();
    let borrowed: Vec<(&[usize], &str)> = entries
        .iter()
        .map(|(idx, s)| (idx.as_slice(), s.as_str()))
        .collect();
    tensor(&name_refs, Valence::METRIC, &borrowed, false)
}

/// Componentwise (canonical) structure constants on an n-chart r1..rn.
pub fn canonical_c(n: usize) -> ChartTensor {
    let names: Vec<String> = (1..=n).map(|i| format!("r{i}")).collect();
    let ch = Chart::new(names).unwrap();
    let ctx = ExprContext::chart(ch.names());
    let entries: Vec<TensorEntry> = (0..n)
        .map(|i| TensorEntry {
            idx: vec![i, i, i],
            expr: FieldExpr::parse("1", &ctx).unwrap(),
        })
        .collect();
    ChartTensor::from_entries(ch, Valence::PRODUCT, &entries, true)
        .unwrap()
        .0
}
