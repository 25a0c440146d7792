//! Compatible connections beyond the flat case: admissible vector fields,
//! the curvature obstruction and its equivalent forms, the canonical-chart
//! (Tsarev) reduction and its series solutions, the semi-Hamiltonian
//! property, Egorov metrics, and quadratic curvature expansions.
//!
//! Index conventions follow the curvature layout `R^i_{l m j}` documented in
//! [`crate::geometry`]; "canonical chart" means coordinates in which the
//! product is componentwise (`c^i_{jk} = δ^i_j δ^i_k`).

use crate::chart::Chart;
use crate::geometry::{curvature, Curvature};
use crate::jet::{Jet, JetShape};
use crate::linalg;
use crate::residual::{ResidualSample, Tolerance};
use crate::series::SeriesTensor;
use crate::tensor::{ChartTensor, EvalTensor, TensorSource, Valence};
use crate::{Error, Result};
use std::collections::HashMap;

/// Residual of the admissibility condition
/// `c^i_{jm} ∇_k X^m = c^i_{km} ∇_j X^m` from order-≥1 jets of `X` and
/// order-≥0 jets of `c`, `Γ` at one point.
pub fn admissible_residual(x: &EvalTensor, c: &EvalTensor, gamma: &EvalTensor) -> ResidualSample {
    let n = c.n();
    let mut nabla_x = vec![0.0; n * n]; // [k*n + m] = ∇_k X^m
    for k in 0..n {
        for m in 0..n {
            let mut acc = x.d(k, &[m]);
            for q in 0..n {
                acc += gamma.v(&[m, k, q]) * x.v(&[q]);
            }
            nabla_x[k * n + m] = acc;
        }
    }
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                let mut scale = 0.0_f64;
                for m in 0..n {
                    let t1 = c.v(&[i, j, m]) * nabla_x[k * n + m];
                    let t2 = c.v(&[i, k, m]) * nabla_x[j * n + m];
                    acc += t1 - t2;
                    scale = scale.max(t1.abs()).max(t2.abs());
                }
                worst = worst.merge(ResidualSample::new(acc.abs(), scale));
            }
        }
    }
    worst
}

fn cyclic_obstruction(c: &EvalTensor, r: &Curvature, x: Option<&EvalTensor>) -> ResidualSample {
    let n = c.n();
    let mut worst = ResidualSample::ZERO;
    for nn in 0..n {
        for p in 0..n {
            for m in 0..n {
                for i in 0..n {
                    for l in 0..n {
                        let weight = match x {
                            Some(x) => x.v(&[l]),
                            None => 1.0,
                        };
                        let mut acc = 0.0;
                        let mut scale = 0.0_f64;
                        for k in 0..n {
                            let t1 = r.r(k, l, m, i) * c.v(&[nn, p, k]) * weight;
                            let t2 = r.r(k, l, i, p) * c.v(&[nn, m, k]) * weight;
                            let t3 = r.r(k, l, p, m) * c.v(&[nn, i, k]) * weight;
                            acc += t1 + t2 + t3;
                            scale = scale.max(t1.abs()).max(t2.abs()).max(t3.abs());
                        }
                        worst = worst.merge(ResidualSample::new(acc.abs(), scale));
                    }
                }
            }
        }
    }
    worst
}

/// Residual of the curvature obstruction (the cyclic sum)
/// `R^k_{lmi} c^n_{pk} + R^k_{lip} c^n_{mk} + R^k_{lpm} c^n_{ik} = 0`
/// over all free indices, from order-≥1 jets of `Γ`.
pub fn curvature_obstruction_residual(c: &EvalTensor, gamma: &EvalTensor) -> ResidualSample {
    cyclic_obstruction(c, &curvature(gamma), None)
}

/// Residual of the vector-wise form
/// `Z∘R(W,Y)(X) + W∘R(Y,Z)(X) + Y∘R(Z,W)(X) = 0` over all basis triples
/// `(Y,W,Z)` for the given field `X` (order-0 jets suffice for `X`).
pub fn vectorwise_obstruction_residual(
    x: &EvalTensor,
    c: &EvalTensor,
    gamma: &EvalTensor,
) -> ResidualSample {
    cyclic_obstruction(c, &curvature(gamma), Some(x))
}

/// Residual of the equivalent Bianchi-derived form
/// `R(Y,Z)(X∘W) + R(X,Y)(Z∘W) + R(Z,X)(Y∘W) = 0` over all basis quadruples.
pub fn bianchi_form_residual(c: &EvalTensor, gamma: &EvalTensor) -> ResidualSample {
    let n = c.n();
    let r = curvature(gamma);
    let mut worst = ResidualSample::ZERO;
    for nn in 0..n {
        for xi in 0..n {
            for y in 0..n {
                for z in 0..n {
                    for w in 0..n {
                        let mut acc = 0.0;
                        let mut scale = 0.0_f64;
                        for l in 0..n {
                            let t1 = r.r(nn, l, y, z) * c.v(&[l, xi, w]);
                            let t2 = r.r(nn, l, xi, y) * c.v(&[l, z, w]);
                            let t3 = r.r(nn, l, z, xi) * c.v(&[l, y, w]);
                            acc += t1 + t2 + t3;
                            scale = scale.max(t1.abs()).max(t2.abs()).max(t3.abs());
                        }
                        worst = worst.merge(ResidualSample::new(acc.abs(), scale));
                    }
                }
            }
        }
    }
    worst
}

/// Residuals of the two Christoffel identities that hold in a canonical
/// chart: `Γ^i_{kk} = −Γ^i_{ki}` for `i ≠ k`, and `Γ^i_{kl} = 0` for
/// pairwise distinct `(i,k,l)`.
#[derive(Debug, Clone, Copy)]
pub struct CanonicalConnectionIdentities {
    pub pair_sum: ResidualSample,
    pub distinct_entries: ResidualSample,
}

pub fn canonical_connection_identities(gamma: &EvalTensor) -> CanonicalConnectionIdentities {
    let n = gamma.n();
    let mut gmax = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                gmax = gmax.max(gamma.v(&[i, j, k]).abs());
            }
        }
    }
    let mut pair = ResidualSample::ZERO;
    let mut distinct = ResidualSample::ZERO;
    for i in 0..n {
        for k in 0..n {
            if k == i {
                continue;
            }
            let a = gamma.v(&[i, k, k]);
            let b = gamma.v(&[i, k, i]);
            pair = pair.merge(ResidualSample::new((a + b).abs(), a.abs().max(b.abs())));
            for l in 0..n {
                if l != i && l != k {
                    distinct = distinct
                        .merge(ResidualSample::new(gamma.v(&[i, k, l]).abs(), gmax));
                }
            }
        }
    }
    CanonicalConnectionIdentities {
        pair_sum: pair,
        distinct_entries: distinct,
    }
}

/// The coefficient table of the canonical-chart reduction of the
/// admissibility system, `∂_k v^i = Γ^i_{ki}(v^k − v^i)` for `i ≠ k`:
/// entry `[i*n + k] = Γ^i_{ki}` (diagonal entries zero). Fails if the
/// canonical-chart Christoffel identities do not hold at the point.
pub fn tsarev_system_coefficients(gamma: &EvalTensor) -> Result<Vec<f64>> {
    let n = gamma.n();
    let ids = canonical_connection_identities(gamma);
    let tol = Tolerance::default();
    if !tol.passes(&ids.pair_sum) || !tol.passes(&ids.distinct_entries) {
        return Err(Error::domain(
            "tsarev_system_coefficients",
            format!(
                "canonical-chart Christoffel identities fail: pair-sum residual {:.3e}, distinct-entry residual {:.3e}",
                ids.pair_sum.residual, ids.distinct_entries.residual
            ),
        ));
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            if k != i {
                w[i * n + k] = gamma.v(&[i, k, i]);
            }
        }
    }
    Ok(w)
}

/// Residual of the two compatibility conditions of the canonical-chart
/// system, over pairwise distinct `(k,i,m)`:
///
/// ```text
/// ∂_i Γ^k_{mk} − ∂_m Γ^k_{ik} = 0,
/// ∂_i Γ^k_{km} − Γ^k_{km} Γ^m_{im} + Γ^k_{ik} Γ^k_{km} − Γ^k_{ik} Γ^i_{im} = 0.
/// ```
///
/// Vacuous (zero) for charts of dimension < 3. Needs order-≥1 jets of `Γ`.
pub fn tsarev_compatibility_residual(gamma: &EvalTensor) -> ResidualSample {
    let n = gamma.n();
    let mut worst = ResidualSample::ZERO;
    for k in 0..n {
        for i in 0..n {
            for m in 0..n {
                if k == i || k == m || i == m {
                    continue;
                }
                let d1 = gamma.d(i, &[k, m, k]);
                let d2 = gamma.d(m, &[k, i, k]);
                worst = worst.merge(ResidualSample::new(
                    (d1 - d2).abs(),
                    d1.abs().max(d2.abs()),
                ));

                let t1 = gamma.d(i, &[k, k, m]);
                let t2 = gamma.v(&[k, k, m]) * gamma.v(&[m, i, m]);
                let t3 = gamma.v(&[k, i, k]) * gamma.v(&[k, k, m]);
                let t4 = gamma.v(&[k, i, k]) * gamma.v(&[i, i, m]);
                worst = worst.merge(ResidualSample::new(
                    (t1 - t2 + t3 - t4).abs(),
                    t1.abs().max(t2.abs()).max(t3.abs()).max(t4.abs()),
                ));
            }
        }
    }
    worst
}

/// Characteristic velocities in a canonical chart, as truncated series
/// around a base point (one solution of the canonical-chart system).
#[derive(Debug, Clone)]
pub struct DiagonalSolution {
    pub series: SeriesTensor,
}

impl DiagonalSolution {
    /// Smallest pairwise gap `|v^i − v^j|` of the velocities at `x`.
    pub fn velocity_gap(&self, x: &[f64]) -> Result<f64> {
        let e = self.series.eval(x, 0)?;
        let n = self.series.n();
        let mut gap = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                gap = gap.min((e.v(&[i]) - e.v(&[j])).abs());
            }
        }
        Ok(gap)
    }
}

/// Relative tolerance for cross-derivative agreement while integrating the
/// canonical-chart system (same rule as the hierarchy solver).
const CONSISTENCY_REL: f64 = 1e-10;
const CONSISTENCY_ABS: f64 = 1e-13;

/// Solve the canonical-chart system `∂_k v^i = Γ^i_{ki}(v^k − v^i)`, `i ≠ k`,
/// as series of degree `k_order` around the expansion point of `gamma`
/// (which must hold order-≥`k_order` jets at `x0`).
///
/// The system leaves each `∂_i v^i` free; that freedom is fixed by
/// `boundary[i]`, the coefficients of a univariate polynomial prescribing
/// `v^i` on the `i`-th coordinate line through `x0` (so `boundary[i][m]`
/// multiplies the `m`-th power of the displacement along axis `i`).
///
/// Cross-derivative conflicts — exactly the failure of the compatibility
/// conditions — abort with [`Error::SeriesInconsistent`] at the degree of
/// the offending right-hand-side coefficient.
pub fn tsarev_solve(
    chart: &Chart,
    gamma: &EvalTensor,
    x0: &[f64],
    boundary: &[Vec<f64>],
    k_order: usize,
) -> Result<DiagonalSolution> {
    let n = chart.dim();
    assert_eq!(gamma.n(), n);
    assert_eq!(x0.len(), n);
    assert!(gamma.order() >= k_order);
    if boundary.len() != n {
        return Err(Error::InvalidArgument(format!(
            "boundary data must give one polynomial per coordinate ({} given, chart dimension {n})",
            boundary.len()
        )));
    }
    for (i, b) in boundary.iter().enumerate() {
        if b.is_empty() || b.len() > k_order + 1 {
            return Err(Error::InvalidArgument(format!(
                "boundary polynomial {i} must have between 1 and {} coefficients",
                k_order + 1
            )));
        }
    }

    let shape = JetShape::get(n, k_order);
    let mut ranks_by_degree: Vec<Vec<usize>> = vec![Vec::new(); k_order + 1];
    for (r, ix) in shape.indices().iter().enumerate() {
        let d: usize = ix.iter().map(|&e| e as usize).sum();
        ranks_by_degree[d].push(r);
    }

    // Boundary data fills the pure-axis coefficients of each component.
    let mut coeffs: Vec<Vec<f64>> = (0..n).map(|_| vec![0.0; shape.len()]).collect();
    for i in 0..n {
        for (m, &b) in boundary[i].iter().enumerate() {
            let mut ix = vec![0u8; n];
            ix[i] = m as u8;
            let rank = shape.rank(&ix).expect("boundary degree within order");
            coeffs[i][rank] = b;
        }
    }

    let w = |i: usize, k: usize| gamma.jet(&[i, k, i]).truncate(k_order);
    let rhs = |v: &[Jet]| -> Vec<Option<Jet>> {
        let mut f: Vec<Option<Jet>> = vec![None; n * n];
        for i in 0..n {
            for k in 0..n {
                if k != i {
                    f[i * n + k] = Some(w(i, k).mul(&v[k].sub(&v[i])));
                }
            }
        }
        f
    };

    for d in 0..k_order {
        let v: Vec<Jet> = coeffs
            .iter()
            .map(|ci| Jet::from_coeffs(n, k_order, ci.clone()))
            .collect();
        let f = rhs(&v);
        // Rounding noise scales with the largest right-hand-side
        // coefficient, not just those of the current degree.
        let mut degree_scale = 0.0_f64;
        for fik in f.iter().flatten() {
            degree_scale = degree_scale.max(fik.max_abs_coeff());
        }
        for &r in &ranks_by_degree[d + 1] {
            let ix = shape.index_at(r).to_vec();
            for (i, ci) in coeffs.iter_mut().enumerate() {
                // Pure-axis coefficients of component i come from the
                // boundary polynomial; every other coefficient is produced
                // by some off-axis relation.
                let off_axes: Vec<usize> =
                    (0..n).filter(|&k| k != i && ix[k] > 0).collect();
                if off_axes.is_empty() {
                    continue;
                }
                let mut sum = 0.0;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &k in &off_axes {
                    let mut parent = ix.clone();
                    parent[k] -= 1;
                    let cand = f[i * n + k].as_ref().unwrap().coeff(&parent)
                        / f64::from(ix[k]);
                    sum += cand;
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
                ci[r] = sum / off_axes.len() as f64;
            }
        }
    }

    let v: Vec<Jet> = coeffs
        .iter()
        .map(|ci| Jet::from_coeffs(n, k_order, ci.clone()))
        .collect();

    // Safety net: every off-axis coefficient relation through degree k−1.
    let f = rhs(&v);
    let mut f_scale = 0.0_f64;
    for fik in f.iter().flatten() {
        f_scale = f_scale.max(fik.max_abs_coeff());
    }
    for ix in shape.indices() {
        let d: usize = ix.iter().map(|&e| e as usize).sum();
        if d >= k_order {
            continue;
        }
        for i in 0..n {
            for k in 0..n {
                if k == i {
                    continue;
                }
                let mut up = ix.clone();
                up[k] += 1;
                let up_rank = shape.rank(&up).expect("degree ≤ k−1 index has children");
                let lhs = coeffs[i][up_rank] * f64::from(up[k]);
                let mismatch = (lhs - f[i * n + k].as_ref().unwrap().coeff(ix)).abs();
                if mismatch > CONSISTENCY_ABS + CONSISTENCY_REL * f_scale {
                    return Err(Error::SeriesInconsistent { degree: d, mismatch });
                }
            }
        }
    }

    Ok(DiagonalSolution {
        series: SeriesTensor::new(chart.clone(), Valence::VECTOR, x0.to_vec(), v),
    })
}

/// Residual of the semi-Hamiltonian property
///
/// ```text
/// ∂_k( ∂_j v^i / (v^j − v^i) ) − ∂_j( ∂_k v^i / (v^k − v^i) ) = 0
/// ```
///
/// over pairwise distinct `(i,j,k)`, from order-≥2 jets of the velocity
/// vector. Vacuous (zero) below dimension 3; coinciding velocities at the
/// point are reported as an error, not evaluated.
pub fn semi_hamiltonian_residual(v: &EvalTensor) -> Result<ResidualSample> {
    let n = v.n();
    if n < 3 {
        return Ok(ResidualSample::ZERO);
    }
    assert!(v.order() >= 2, "semi-Hamiltonian residual needs order-2 jets");
    let mut vmax = 0.0_f64;
    for i in 0..n {
        vmax = vmax.max(v.v(&[i]).abs());
    }
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            gap = gap.min((v.v(&[i]) - v.v(&[j])).abs());
        }
    }
    if gap < 1e-8 * vmax.max(1.0) {
        return Err(Error::domain(
            "semi_hamiltonian_residual",
            format!("coinciding characteristic velocities at the sample point (gap {gap:.3e})"),
        ));
    }

    // ∂_k of the quotient ∂_j v^i / (v^j − v^i) by the quotient rule.
    let term = |i: usize, j: usize, k: usize| -> f64 {
        let num = v.d(j, &[i]);
        let den = v.v(&[j]) - v.v(&[i]);
        let dnum = v.dd(k, j, &[i]);
        let dden = v.d(k, &[j]) - v.d(k, &[i]);
        (dnum * den - num * dden) / (den * den)
    };
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j || i == k || j == k {
                    continue;
                }
                let a = term(i, j, k);
                let b = term(i, k, j);
                worst = worst.merge(ResidualSample::new((a - b).abs(), a.abs().max(b.abs())));
            }
        }
    }
    Ok(worst)
}

/// Residual of product-invariance of the pairing, in both displayed forms:
/// covariant `g_{iq} c^q_{lp} = g_{lq} c^q_{ip}` and contravariant
/// `g^{iq} c^l_{qp} = g^{lq} c^i_{qp}` (the latter needs `g` invertible).
pub fn invariance_residual(g: &EvalTensor, c: &EvalTensor) -> Result<ResidualSample> {
    let n = g.n();
    let gm = nalgebra::DMatrix::from_fn(n, n, |i, j| g.v(&[i, j]));
    let ginv = linalg::invert_f64(gm, "metric inverse for invariance residual")?;
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for l in 0..n {
            for p in 0..n {
                let mut cov = 0.0;
                let mut con = 0.0;
                let mut scale = 0.0_f64;
                for q in 0..n {
                    let t1 = g.v(&[i, q]) * c.v(&[q, l, p]);
                    let t2 = g.v(&[l, q]) * c.v(&[q, i, p]);
                    cov += t1 - t2;
                    let s1 = ginv[(i, q)] * c.v(&[l, q, p]);
                    let s2 = ginv[(l, q)] * c.v(&[i, q, p]);
                    con += s1 - s2;
                    scale = scale
                        .max(t1.abs())
                        .max(t2.abs())
                        .max(s1.abs())
                        .max(s2.abs());
                }
                worst = worst
                    .merge(ResidualSample::new(cov.abs(), scale))
                    .merge(ResidualSample::new(con.abs(), scale));
            }
        }
    }
    Ok(worst)
}

/// Egorov test of a metric in a canonical chart: diagonality, and the
/// closure condition `∂_j g_{ii} = ∂_i g_{jj}` (local existence of a
/// potential with `g_{ii} = ∂_i F`). Needs order-≥1 jets of `g`.
#[derive(Debug, Clone, Copy)]
pub struct EgorovCheck {
    pub off_diagonal: ResidualSample,
    pub closure: ResidualSample,
}

impl EgorovCheck {
    pub fn worst(&self) -> ResidualSample {
        self.off_diagonal.merge(self.closure)
    }
}

pub fn egorov_check(g: &EvalTensor) -> EgorovCheck {
    let n = g.n();
    let mut diag_scale = 0.0_f64;
    for i in 0..n {
        diag_scale = diag_scale.max(g.v(&[i, i]).abs());
    }
    let mut off = ResidualSample::ZERO;
    let mut closure = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            off = off.merge(ResidualSample::new(g.v(&[i, j]).abs(), diag_scale));
            let a = g.d(j, &[i, i]);
            let b = g.d(i, &[j, j]);
            closure = closure.merge(ResidualSample::new((a - b).abs(), a.abs().max(b.abs())));
        }
    }
    EgorovCheck {
        off_diagonal: off,
        closure,
    }
}

/// A finite family of flows with signs, whose symmetric square is claimed to
/// reproduce the (raised) curvature:
/// `R^{sk}_{mi} = (c^s_{ml} c^k_{iq} − c^s_{il} c^k_{mq}) Σ_α ε_α X^l_{(α)} X^q_{(α)}`.
#[derive(Debug, Clone)]
pub struct QuadraticExpansion {
    pub fields: Vec<ChartTensor>,
    pub signs: Vec<f64>,
}

impl QuadraticExpansion {
    pub fn new(fields: Vec<ChartTensor>, signs: Vec<f64>) -> Result<QuadraticExpansion> {
        if fields.len() != signs.len() {
            return Err(Error::InvalidArgument(
                "quadratic expansion needs one sign per field".into(),
            ));
        }
        if signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::InvalidArgument(
                "quadratic expansion signs must be +1 or −1".into(),
            ));
        }
        Ok(QuadraticExpansion { fields, signs })
    }
}

/// Outcome of a quadratic-expansion test at one point.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticMatch {
    /// `max |g^{sl} R^k_{lmi} − RHS^{sk}_{mi}|`: the geometric curvature of
    /// the metric against the expansion.
    pub curvature_match: ResidualSample,
    /// Residual of the curvature-obstruction cyclic sum applied to the
    /// expansion tensor itself — zero for any associative product,
    /// independently of the metric.
    pub obstruction_identity: ResidualSample,
}

pub fn quadratic_expansion_check(
    q: &QuadraticExpansion,
    metric: &ChartTensor,
    c: &ChartTensor,
    x0: &[f64],
    params: &HashMap<String, f64>,
) -> Result<QuadraticMatch> {
    let n = metric.n();
    let nabla = crate::geometry::Connection::LeviCivita {
        metric: metric.clone(),
    };
    let gamma = nabla.gamma(x0, 1, params)?;
    let r = curvature(&gamma);
    let g = metric.eval(x0, 0, params)?;
    let gm = nalgebra::DMatrix::from_fn(n, n, |i, j| g.v(&[i, j]));
    let ginv = linalg::invert_f64(gm, "metric inverse for quadratic expansion")?;
    let cj = c.eval(x0, 0, params)?;

    // E^{lq} = Σ_α ε_α X^l X^q.
    let mut e = vec![0.0; n * n];
    for (field, sign) in q.fields.iter().zip(&q.signs) {
        let xv = field.eval(x0, 0, params)?;
        for l in 0..n {
            for qq in 0..n {
                e[l * n + qq] += sign * xv.v(&[l]) * xv.v(&[qq]);
            }
        }
    }

    let expansion = |s: usize, k: usize, m: usize, i: usize| -> (f64, f64) {
        let mut acc = 0.0;
        let mut scale = 0.0_f64;
        for l in 0..n {
            for qq in 0..n {
                let t = (cj.v(&[s, m, l]) * cj.v(&[k, i, qq])
                    - cj.v(&[s, i, l]) * cj.v(&[k, m, qq]))
                    * e[l * n + qq];
                acc += t;
                scale = scale.max(t.abs());
            }
        }
        (acc, scale)
    };

    let mut mat = ResidualSample::ZERO;
    for s in 0..n {
        for k in 0..n {
            for m in 0..n {
                for i in 0..n {
                    let mut geom = 0.0;
                    let mut scale = 0.0_f64;
                    for l in 0..n {
                        let t = ginv[(s, l)] * r.r(k, l, m, i);
                        geom += t;
                        scale = scale.max(t.abs());
                    }
                    let (rhs, rhs_scale) = expansion(s, k, m, i);
                    mat = mat.merge(ResidualSample::new(
                        (geom - rhs).abs(),
                        scale.max(rhs_scale),
                    ));
                }
            }
        }
    }

    // Cyclic obstruction sum applied to the expansion tensor.
    let mut obstruction = ResidualSample::ZERO;
    for s in 0..n {
        for nn in 0..n {
            for p in 0..n {
                for m in 0..n {
                    for i in 0..n {
                        let mut acc = 0.0;
                        let mut scale = 0.0_f64;
                        for k in 0..n {
                            let (a, _) = expansion(s, k, m, i);
                            let (b, _) = expansion(s, k, i, p);
                            let (cc, _) = expansion(s, k, p, m);
                            let t1 = a * cj.v(&[nn, p, k]);
                            let t2 = b * cj.v(&[nn, m, k]);
                            let t3 = cc * cj.v(&[nn, i, k]);
                            acc += t1 + t2 + t3;
                            scale = scale.max(t1.abs()).max(t2.abs()).max(t3.abs());
                        }
                        obstruction =
                            obstruction.merge(ResidualSample::new(acc.abs(), scale));
                    }
                }
            }
        }
    }

    Ok(QuadraticMatch {
        curvature_match: mat,
        obstruction_identity: obstruction,
    })
}

/// The two families of curvature components that must vanish in a canonical
/// chart when the curvature obstruction holds: `R^n_{nmi}` for `n ∉ {m,i}`,
/// `m ≠ i`, and `R^n_{mmi}` for pairwise distinct `(n,m,i)`. Vacuous below
/// dimension 3.
#[derive(Debug, Clone, Copy)]
pub struct CanonicalCurvatureVanishing {
    pub first_kind: ResidualSample,
    pub second_kind: ResidualSample,
}

/// Levi-Civita connection jets of the diagonal potential metric
/// `g_ii = ∂_i F`, from jets of the potential `F` (output order is two less
/// than the input order). Fails if some `∂_i F` vanishes at the base point.
pub fn egorov_connection_jets(f: &Jet) -> Result<EvalTensor> {
    let n = f.dim();
    assert!(f.order() >= 2, "potential jets must have order at least 2");
    let order = f.order() - 2;
    let gii: Vec<Jet> = (0..n).map(|i| f.derivative(i)).collect();
    let ginv: Vec<Jet> = gii
        .iter()
        .map(|g| g.truncate(order).recip())
        .collect::<Result<Vec<_>>>()
        .map_err(|_| {
            Error::domain(
                "egorov_connection_jets",
                "a diagonal metric coefficient ∂_i F vanishes at the base point",
            )
        })?;
    let mut jets = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // Diagonal metric: Γ^i_{ij} = ∂_j g_ii/(2 g_ii),
                // Γ^i_{jj} = −∂_i g_jj/(2 g_ii) for j ≠ i, all others zero.
                let jet = if i == j {
                    gii[i].derivative(k).mul(&ginv[i]).scale(0.5)
                } else if i == k {
                    gii[i].derivative(j).mul(&ginv[i]).scale(0.5)
                } else if j == k {
                    gii[j].derivative(i).mul(&ginv[i]).scale(-0.5)
                } else {
                    Jet::constant(n, order, 0.0)
                };
                jets.push(jet);
            }
        }
    }
    Ok(EvalTensor::new(n, Valence::PRODUCT, order, jets))
}

pub fn canonical_curvature_vanishing(gamma: &EvalTensor) -> CanonicalCurvatureVanishing {
    let n = gamma.n();
    let r = curvature(gamma);
    let scale = r.term_scale();
    let mut first = ResidualSample::ZERO;
    let mut second = ResidualSample::ZERO;
    for nn in 0..n {
        for m in 0..n {
            for i in 0..n {
                if m == i || nn == m || nn == i {
                    continue;
                }
                first = first.merge(ResidualSample::new(r.r(nn, nn, m, i).abs(), scale));
                second = second.merge(ResidualSample::new(r.r(nn, m, m, i).abs(), scale));
            }
        }
    }
    CanonicalCurvatureVanishing {
        first_kind: first,
        second_kind: second,
    }
}
