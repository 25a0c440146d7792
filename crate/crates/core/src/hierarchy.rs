//! Principal hierarchies of commuting hydrodynamic flows.
//!
//! Starting from a basis of ∇-parallel vector fields `X_{(p,0)}`, each chain
//! is extended by the raising recursion
//!
//! ```text
//! ∇_j X^i_{(p,α)} = c^i_{jk} X^k_{(p,α−1)},
//! ```
//!
//! integrated degree by degree as an exact truncated power series around a
//! base point. Solvability of each step needs zero curvature and a totally
//! symmetric ∇c; violations surface as cross-derivative mismatches and are
//! reported as [`Error::SeriesInconsistent`] at the degree where they occur.

use std::collections::HashMap;

use crate::chart::Chart;
use crate::geometry::{curvature, Connection};
use crate::jet::{Jet, JetShape};
use crate::residual::ResidualSample;
use crate::series::SeriesTensor;
use crate::tensor::{ChartTensor, EvalTensor, TensorSource, Valence};
use crate::{Error, Result};

/// Relative tolerance for cross-derivative agreement while integrating.
const CONSISTENCY_REL: f64 = 1e-10;
/// Absolute floor for the same check (guards all-zero degrees).
const CONSISTENCY_ABS: f64 = 1e-13;

/// One member `X_{(p,α)}` of a hierarchy: a vector field given as a truncated
/// power series around the hierarchy's base point.
#[derive(Debug, Clone)]
pub struct SeriesVectorField {
    /// 1-based index of the chain (the coordinate direction of the parallel
    /// field the chain starts from).
    pub p: usize,
    /// Level within the chain (`0` for the parallel seed field).
    pub alpha: usize,
    /// The field's components as series around the base point.
    pub series: SeriesTensor,
}

/// Right-hand sides `F^i_j = −Γ^i_{jq} X^q + S^i_j` as order-`k` jets, given
/// the current partial solution `x` (row-major `n*n` result).
fn rhs_jets(gamma: &EvalTensor, source: Option<&[Jet]>, x: &[Jet], k: usize) -> Vec<Jet> {
    let n = x.len();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = match source {
                Some(s) => s[i * n + j].truncate(k),
                None => Jet::constant(n, k, 0.0),
            };
            for q in 0..n {
                acc = acc.sub(&gamma.jet(&[i, j, q]).truncate(k).mul(&x[q]));
            }
            out.push(acc);
        }
    }
    out
}

/// Integrate `∂_j X^i = −Γ^i_{jq} X^q + S^i_j` as a power series of degree
/// `k` around the point where `gamma` and `source` were expanded, with
/// `X(base) = const_term`.
///
/// Degree `d+1` coefficients follow from degree-`d` coefficients of the
/// right-hand side: the jet coefficient of `X^i` at a multi-index `B` equals
/// `F^i_{j,B−e_j} / B_j` for every axis `j` with `B_j ≥ 1`. All available
/// axes are computed and compared; disagreement beyond tolerance means the
/// right-hand side has asymmetric cross-derivatives, and integration stops
/// with the degree of the offending right-hand-side coefficient.
fn integrate_linear_system(
    gamma: &EvalTensor,
    source: Option<&[Jet]>,
    const_term: &[f64],
    k: usize,
) -> Result<Vec<Jet>> {
    let n = gamma.n();
    assert_eq!(const_term.len(), n);
    assert!(gamma.order() >= k, "Christoffel jets of order ≥ k required");
    let shape = JetShape::get(n, k);

    let mut ranks_by_degree: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    for (r, ix) in shape.indices().iter().enumerate() {
        let d: usize = ix.iter().map(|&e| e as usize).sum();
        ranks_by_degree[d].push(r);
    }

    let mut coeffs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut v = vec![0.0; shape.len()];
            v[0] = const_term[i];
            v
        })
        .collect();

    for d in 0..k {
        let x: Vec<Jet> = coeffs
            .iter()
            .map(|ci| Jet::from_coeffs(n, k, ci.clone()))
            .collect();
        let f = rhs_jets(gamma, source, &x, k);
        // Scale for the cross-derivative agreement check: rounding noise is
        // proportional to the largest right-hand-side coefficient overall,
        // not just those of the current degree.
        let mut degree_scale = 0.0_f64;
        for fij in &f {
            degree_scale = degree_scale.max(fij.max_abs_coeff());
        }
        for &r in &ranks_by_degree[d + 1] {
            let ix = shape.index_at(r).to_vec();
            for (i, ci) in coeffs.iter_mut().enumerate() {
                let mut sum = 0.0;
                let mut count = 0.0;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for j in 0..n {
                    if ix[j] == 0 {
                        continue;
                    }
                    let mut parent = ix.clone();
                    parent[j] -= 1;
                    let cand = f[i * n + j].coeff(&parent) / f64::from(ix[j]);
                    sum += cand;
                    count += 1.0;
                    lo = lo.min(cand);
                    hi = hi.max(cand);
                }
                let spread = hi - lo;
                let scale = degree_scale.max(lo.abs()).max(hi.abs());
                if spread > CONSISTENCY_ABS + CONSISTENCY_REL * scale {
                    return Err(Error::SeriesInconsistent {
                        degree: d,
                        mismatch: spread,
                    });
                }
                ci[r] = sum / count;
            }
        }
    }

    let x: Vec<Jet> = coeffs
        .iter()
        .map(|ci| Jet::from_coeffs(n, k, ci.clone()))
        .collect();

    // Safety net: re-check every coefficient relation against the final
    // right-hand side (the per-degree averaging already bounds this).
    let f = rhs_jets(gamma, source, &x, k);
    let mut f_scale = 0.0_f64;
    for fij in &f {
        f_scale = f_scale.max(fij.max_abs_coeff());
    }
    for ix in shape.indices() {
        let d: usize = ix.iter().map(|&e| e as usize).sum();
        if d >= k {
            continue;
        }
        for j in 0..n {
            let mut up = ix.clone();
            up[j] += 1;
            let up_rank = shape.rank(&up).expect("degree ≤ k−1 index has children");
            for i in 0..n {
                let lhs = coeffs[i][up_rank] * f64::from(up[j]);
                let mismatch = (lhs - f[i * n + j].coeff(ix)).abs();
                if mismatch > CONSISTENCY_ABS + CONSISTENCY_REL * f_scale {
                    return Err(Error::SeriesInconsistent {
                        degree: d,
                        mismatch,
                    });
                }
            }
        }
    }

    Ok(x)
}

/// Basis of ∇-parallel vector fields as degree-`k` series around `x0`,
/// normalized to the coordinate frame at `x0` (`X_{(p,0)}(x0) = ∂_p`).
///
/// Fails if the connection is not flat at `x0` (reporting the largest
/// curvature component) or if parallel transport is path-dependent at the
/// working precision.
pub fn flat_basis(
    chart: &Chart,
    nabla: &Connection,
    x0: &[f64],
    k: usize,
    params: &HashMap<String, f64>,
) -> Result<Vec<SeriesVectorField>> {
    let n = chart.dim();
    assert_eq!(nabla.dim(), n);
    assert_eq!(x0.len(), n);
    let gamma = nabla.gamma(x0, k.max(1), params)?;
    let curv = curvature(&gamma);
    let curv_tol = 1e-8 * curv.term_scale().max(1.0);
    if curv.max_abs() > curv_tol {
        return Err(Error::domain(
            "flat_basis",
            format!(
                "connection is not flat at the base point: max |R^i_lmj| = {:.6e} (tolerance {:.1e})",
                curv.max_abs(),
                curv_tol
            ),
        ));
    }
    let gamma = nabla.gamma(x0, k, params)?;
    let mut basis = Vec::with_capacity(n);
    for p in 0..n {
        let mut const_term = vec![0.0; n];
        const_term[p] = 1.0;
        let comps = integrate_linear_system(&gamma, None, &const_term, k)?;
        basis.push(SeriesVectorField {
            p: p + 1,
            alpha: 0,
            series: SeriesTensor::new(chart.clone(), Valence::VECTOR, x0.to_vec(), comps),
        });
    }
    Ok(basis)
}

/// One raising step: solve `∇_j X^i = c^i_{jq} P^q` for the next chain member
/// above `prev = X_{(p,α)}`, normalized by `X(x0) = const_term`.
pub fn raise_level(
    prev: &SeriesVectorField,
    nabla: &Connection,
    c: &ChartTensor,
    const_term: &[f64],
    params: &HashMap<String, f64>,
) -> Result<SeriesVectorField> {
    let chart = prev.series.chart().clone();
    let n = chart.dim();
    let x0 = prev.series.base().to_vec();
    let k = prev.series.series_order();
    let gamma = nabla.gamma(&x0, k, params)?;
    let cj = c.eval(&x0, k, params)?;
    let prev_comps = prev.series.components();
    let mut source = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::constant(n, k, 0.0);
            for q in 0..n {
                acc = acc.add(&cj.jet(&[i, j, q]).truncate(k).mul(&prev_comps[q].truncate(k)));
            }
            source.push(acc);
        }
    }
    let comps = integrate_linear_system(&gamma, Some(&source), const_term, k)?;
    Ok(SeriesVectorField {
        p: prev.p,
        alpha: prev.alpha + 1,
        series: SeriesTensor::new(chart, Valence::VECTOR, x0, comps),
    })
}

/// Pointwise residuals of the three conditions that make the raising
/// recursion solvable for every seed: zero curvature, totally symmetric ∇c
/// (its antisymmetrized part in the two derivative slots), and associativity
/// of the product.
#[derive(Debug, Clone, Copy)]
pub struct CompatibilityResidual {
    pub curvature: ResidualSample,
    pub covariant_symmetry: ResidualSample,
    pub associativity: ResidualSample,
}

impl CompatibilityResidual {
    /// Worst of the three residuals (shared scale by `merge`).
    pub fn worst(&self) -> ResidualSample {
        self.curvature
            .merge(self.covariant_symmetry)
            .merge(self.associativity)
    }
}

/// Evaluate the compatibility brackets from order-≥1 jets of `c` and `Γ` at
/// one point. The covariant-symmetry bracket is
///
/// ```text
/// ∂_m c^i_{jl} − ∂_j c^i_{ml} − Γ^i_{km} c^k_{ml}|_{k↔j} … (six terms)
/// ```
///
/// explicitly: `∂_m c^i_{jl} − ∂_j c^i_{ml} − Γ^i_{kj} c^k_{ml}
/// − Γ^k_{lm} c^i_{jk} + Γ^i_{km} c^k_{jl} + Γ^k_{lj} c^i_{mk}`.
pub fn compatibility_residual(c: &EvalTensor, gamma: &EvalTensor) -> CompatibilityResidual {
    let n = c.n();
    assert_eq!(gamma.n(), n);
    assert!(c.order() >= 1 && gamma.order() >= 1);

    let curv = curvature(gamma);
    let curvature_sample = ResidualSample::new(curv.max_abs(), curv.term_scale());

    let mut sym = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let mut acc = c.d(m, &[i, j, l]) - c.d(j, &[i, m, l]);
                    let mut scale = c.d(m, &[i, j, l]).abs().max(c.d(j, &[i, m, l]).abs());
                    for q in 0..n {
                        let t3 = gamma.v(&[i, q, j]) * c.v(&[q, m, l]);
                        let t4 = gamma.v(&[q, l, m]) * c.v(&[i, j, q]);
                        let t5 = gamma.v(&[i, q, m]) * c.v(&[q, j, l]);
                        let t6 = gamma.v(&[q, l, j]) * c.v(&[i, m, q]);
                        acc += -t3 - t4 + t5 + t6;
                        scale = scale.max(t3.abs()).max(t4.abs()).max(t5.abs()).max(t6.abs());
                    }
                    sym = sym.merge(ResidualSample::new(acc.abs(), scale));
                }
            }
        }
    }

    let assoc = crate::algebra::associativity(c);

    CompatibilityResidual {
        curvature: curvature_sample,
        covariant_symmetry: sym,
        associativity: assoc,
    }
}

/// A table of hierarchy members `X_{(p,α)}`, `1 ≤ p ≤ p_max`,
/// `0 ≤ α ≤ alpha_max`, all expanded around one base point.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    chart: Chart,
    x0: Vec<f64>,
    k: usize,
    p_max: usize,
    alpha_max: usize,
    members: Vec<SeriesVectorField>,
}

impl Hierarchy {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn base(&self) -> &[f64] {
        &self.x0
    }

    pub fn series_order(&self) -> usize {
        self.k
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn alpha_max(&self) -> usize {
        self.alpha_max
    }

    /// All members, grouped by chain `p` (ascending), then by level `α`.
    pub fn members(&self) -> &[SeriesVectorField] {
        &self.members
    }

    /// The member `X_{(p,α)}` (`p` is 1-based).
    pub fn member(&self, p: usize, alpha: usize) -> &SeriesVectorField {
        assert!(
            (1..=self.p_max).contains(&p) && alpha <= self.alpha_max,
            "hierarchy member ({p},{alpha}) out of range"
        );
        &self.members[(p - 1) * (self.alpha_max + 1) + alpha]
    }

    /// Largest displacement radius at which the discarded series tail is
    /// expected to stay below `coeff_bound`: the top-degree coefficients give
    /// the estimate `r = (coeff_bound / m_K)^(1/K)` minimized over members.
    /// Infinite when every member is a polynomial of degree < K.
    pub fn tail_radius(&self, coeff_bound: f64) -> f64 {
        assert!(coeff_bound > 0.0);
        if self.k == 0 {
            return f64::INFINITY;
        }
        let mut radius = f64::INFINITY;
        for m in &self.members {
            let top = m.series.max_coeff_at_degree(self.k);
            if top > 0.0 {
                radius = radius.min((coeff_bound / top).powf(1.0 / self.k as f64));
            }
        }
        radius
    }
}

/// Build the table of hierarchy members over a flat basis at `x0`: chains
/// seeded by the parallel fields (normalized to the coordinate frame at
/// `x0`), raised to level `alpha_max` with zero integration constants.
pub fn build_hierarchy(
    chart: &Chart,
    nabla: &Connection,
    c: &ChartTensor,
    x0: &[f64],
    p_max: usize,
    alpha_max: usize,
    k: usize,
    params: &HashMap<String, f64>,
) -> Result<Hierarchy> {
    let n = chart.dim();
    assert_eq!(c.n(), n);
    if p_max == 0 || p_max > n {
        return Err(Error::InvalidArgument(format!(
            "hierarchy chain count p_max = {p_max} must be between 1 and the chart dimension {n}"
        )));
    }
    let basis = flat_basis(chart, nabla, x0, k, params)?;
    let zeros = vec![0.0; n];
    let mut members = Vec::with_capacity(p_max * (alpha_max + 1));
    for seed in basis.into_iter().take(p_max) {
        let mut chain = vec![seed];
        for _ in 0..alpha_max {
            let next = raise_level(chain.last().unwrap(), nabla, c, &zeros, params)?;
            chain.push(next);
        }
        members.extend(chain);
    }
    Ok(Hierarchy {
        chart: chart.clone(),
        x0: x0.to_vec(),
        k,
        p_max,
        alpha_max,
        members,
    })
}

/// Pointwise residual of the raising relation
/// `∂_j X^i + Γ^i_{jq} X^q − c^i_{jq} P^q = 0` between consecutive chain
/// members, evaluated at `x`.
pub fn recursion_residual(
    prev: &SeriesVectorField,
    cur: &SeriesVectorField,
    nabla: &Connection,
    c: &ChartTensor,
    x: &[f64],
    params: &HashMap<String, f64>,
) -> Result<ResidualSample> {
    let n = cur.series.n();
    let xj = cur.series.eval(x, 1)?;
    let pj = prev.series.eval(x, 0)?;
    let gamma = nabla.gamma(x, 0, params)?;
    let cj = c.eval(x, 0, params)?;
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            let mut acc = xj.d(j, &[i]);
            let mut scale = acc.abs();
            for q in 0..n {
                let t1 = gamma.v(&[i, j, q]) * xj.v(&[q]);
                let t2 = cj.v(&[i, j, q]) * pj.v(&[q]);
                acc += t1 - t2;
                scale = scale.max(t1.abs()).max(t2.abs());
            }
            worst = worst.merge(ResidualSample::new(acc.abs(), scale));
        }
    }
    Ok(worst)
}

/// Residual of flatness for the deformed connection `∇ + z c` applied to the
/// alternating generating series of one chain,
///
/// ```text
/// Y(z) = Σ_{α=0}^{A} (−z)^α X_{(p,α)},
/// ```
///
/// with the exact truncation tail `(−1)^A z^{A+1} c(·, X_{(p,A)})` removed:
/// for exact chain members the result vanishes identically in `z`.
pub fn deformed_flatness_residual(
    chain: &[SeriesVectorField],
    nabla: &Connection,
    c: &ChartTensor,
    z: f64,
    x: &[f64],
    params: &HashMap<String, f64>,
) -> Result<ResidualSample> {
    assert!(!chain.is_empty());
    let n = chain[0].series.n();
    for (a, m) in chain.iter().enumerate() {
        assert_eq!(m.alpha, a, "chain must list levels 0..=A in order");
    }
    let top = chain.len() - 1;

    // Y and its first derivatives; the top member's values for the tail.
    let mut y = vec![0.0; n];
    let mut dy = vec![0.0; n * n]; // [j][i] = ∂_j Y^i
    let mut xa_top = vec![0.0; n];
    let mut sign_z = 1.0;
    for m in chain {
        let e = m.series.eval(x, 1)?;
        for i in 0..n {
            y[i] += sign_z * e.v(&[i]);
            for j in 0..n {
                dy[j * n + i] += sign_z * e.d(j, &[i]);
            }
            if m.alpha == top {
                xa_top[i] = e.v(&[i]);
            }
        }
        sign_z *= -z;
    }
    let tail_factor = if top % 2 == 0 { 1.0 } else { -1.0 } * z.powi(top as i32 + 1);

    let gamma = nabla.gamma(x, 0, params)?;
    let cj = c.eval(x, 0, params)?;
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            let mut acc = dy[j * n + i];
            let mut scale = acc.abs();
            for q in 0..n {
                let t1 = gamma.v(&[i, j, q]) * y[q];
                let t2 = z * cj.v(&[i, j, q]) * y[q];
                let t3 = tail_factor * cj.v(&[i, j, q]) * xa_top[q];
                acc += t1 + t2 - t3;
                scale = scale.max(t1.abs()).max(t2.abs()).max(t3.abs());
            }
            worst = worst.merge(ResidualSample::new(acc.abs(), scale));
        }
    }
    Ok(worst)
}
