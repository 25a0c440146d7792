//! Pointwise tensor calculus on a chart: connections, torsion, curvature,
//! covariant and Lie derivatives, and the pencil of connections Γ + z·c.
//!
//! Curvature convention:
//! `R^i_{l m j} = ∂_m Γ^i_{jl} − ∂_j Γ^i_{ml} + Γ^i_{mk} Γ^k_{jl} − Γ^i_{jk} Γ^k_{ml}`,
//! i.e. `(R(U,V)W)^i = R^i_{l m j} W^l U^m V^j`, antisymmetric in the last
//! two lower indices.

pub mod chart_map;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg::jet_inverse;
use crate::tensor::{ChartTensor, EvalTensor, Valence};
use std::collections::HashMap;

/// An affine connection on a chart.
#[derive(Debug, Clone)]
pub enum Connection {
    /// All Christoffel symbols vanish (the chart is an affine flat chart).
    Zero { dim: usize },
    /// Christoffel symbols given componentwise (not symmetrized: torsion is
    /// checkable).
    Expressions { gamma: ChartTensor },
    /// Levi-Civita connection of a metric, built from metric jets.
    LeviCivita { metric: ChartTensor },
}

impl Connection {
    pub fn dim(&self) -> usize {
        match self {
            Connection::Zero { dim } => *dim,
            Connection::Expressions { gamma } => gamma.n(),
            Connection::LeviCivita { metric } => metric.n(),
        }
    }

    /// Christoffel symbols as jets of the requested order at `x`,
    /// valence (1,2) with layout `[i, j, k]` for `Γ^i_{jk}`.
    pub fn gamma(
        &self,
        x: &[f64],
        order: usize,
        params: &HashMap<String, f64>,
    ) -> Result<EvalTensor> {
        match self {
            Connection::Zero { dim } => {
                let n = *dim;
                let jets = vec![Jet::constant(n, order, 0.0); n * n * n];
                Ok(EvalTensor::new(n, Valence::PRODUCT, order, jets))
            }
            Connection::Expressions { gamma } => gamma.eval(x, order, params),
            Connection::LeviCivita { metric } => {
                let g = metric.eval(x, order + 1, params)?;
                let n = g.n();
                let gm: Vec<Vec<Jet>> = (0..n)
                    .map(|i| (0..n).map(|j| g.jet(&[i, j]).clone()).collect())
                    .collect();
                let ginv = jet_inverse(&gm, "metric inverse for Levi-Civita connection")?;
                let dg = |m: usize, i: usize, j: usize| g.jet(&[i, j]).derivative(m);
                let mut jets = Vec::with_capacity(n * n * n);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let mut acc = Jet::constant(n, order, 0.0);
                            for l in 0..n {
                                let paren = dg(j, l, k).add(&dg(k, l, j)).sub(&dg(l, j, k));
                                acc = acc.add(&ginv[i][l].truncate(order).mul(&paren));
                            }
                            jets.push(acc.scale(0.5));
                        }
                    }
                }
                Ok(EvalTensor::new(n, Valence::PRODUCT, order, jets))
            }
        }
    }
}

/// Curvature values at a point, layout `R^i_{l m j}`.
#[derive(Debug, Clone)]
pub struct Curvature {
    n: usize,
    vals: Vec<f64>,
    term_scale: f64,
}

impl Curvature {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self, i: usize, l: usize, m: usize, j: usize) -> f64 {
        self.vals[((i * self.n + l) * self.n + m) * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Largest absolute value of any summand that entered the computation
    /// (scale for relative tolerances).
    pub fn term_scale(&self) -> f64 {
        self.term_scale
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Max |R^i_{lmj} + R^i_{ljm}| (must vanish identically).
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for l in 0..n {
                for m in 0..n {
                    for j in 0..n {
                        worst = worst.max((self.r(i, l, m, j) + self.r(i, l, j, m)).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Curvature) -> f64 {
        assert_eq!(self.n, other.n);
        self.vals
            .iter()
            .zip(&other.vals)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Curvature from Christoffel jets (needs order ≥ 1).
pub fn curvature(gamma: &EvalTensor) -> Curvature {
    assert!(gamma.order() >= 1, "curvature needs order-1 jets of Γ");
    let n = gamma.n();
    let mut vals = Vec::with_capacity(n * n * n * n);
    let mut term_scale = 0.0f64;
    for i in 0..n {
        for l in 0..n {
            for m in 0..n {
                for j in 0..n {
                    let t1 = gamma.d(m, &[i, j, l]);
                    let t2 = gamma.d(j, &[i, m, l]);
                    term_scale = term_scale.max(t1.abs()).max(t2.abs());
                    let mut r = t1 - t2;
                    for k in 0..n {
                        let p1 = gamma.v(&[i, m, k]) * gamma.v(&[k, j, l]);
                        let p2 = gamma.v(&[i, j, k]) * gamma.v(&[k, m, l]);
                        term_scale = term_scale.max(p1.abs()).max(p2.abs());
                        r += p1 - p2;
                    }
                    vals.push(r);
                }
            }
        }
    }
    Curvature {
        n,
        vals,
        term_scale,
    }
}

/// Christoffel jets of the connection pencil `Γ^i_{jk} + z c^i_{jk}`.
pub fn deformed_gamma(gamma: &EvalTensor, c: &EvalTensor, z: f64) -> EvalTensor {
    assert_eq!(gamma.n(), c.n());
    let order = gamma.order().min(c.order());
    let jets = gamma
        .jets()
        .iter()
        .zip(c.jets())
        .map(|(g, cj)| g.truncate(order).add(&cj.truncate(order).scale(z)))
        .collect();
    EvalTensor::new(gamma.n(), Valence::PRODUCT, order, jets)
}

/// Torsion `T^i_{jk} = Γ^i_{jk} − Γ^i_{kj}` as jets.
pub fn torsion(gamma: &EvalTensor) -> EvalTensor {
    let n = gamma.n();
    let mut jets = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                jets.push(gamma.jet(&[i, j, k]).sub(gamma.jet(&[i, k, j])));
            }
        }
    }
    EvalTensor::new(n, Valence::PRODUCT, gamma.order(), jets)
}

/// Covariant derivative of a tensor of valence (1,2), (1,1), (1,0) or (0,2).
///
/// The new covariant index is the first lower index of the result, so for a
/// product tensor the layout is `(∇T)[i, m, j, k] = ∇_m T^i_{jk}`. The result
/// order is `t.order() − 1`; `gamma` must have at least that order.
pub fn covariant_derivative(t: &EvalTensor, gamma: &EvalTensor) -> Result<EvalTensor> {
    assert!(t.order() >= 1, "covariant derivative needs order ≥ 1 jets");
    let n = t.n();
    assert_eq!(gamma.n(), n);
    let q = t.order() - 1;
    assert!(gamma.order() >= q, "Γ jets have insufficient order");
    let ga = |i: usize, j: usize, k: usize| gamma.jet(&[i, j, k]).truncate(q);
    let mut jets = Vec::new();
    match (t.valence().up, t.valence().down) {
        (1, 2) => {
            for i in 0..n {
                for m in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let mut acc = t.jet(&[i, j, k]).derivative(m);
                            for p in 0..n {
                                acc = acc.add(&ga(i, m, p).mul(&t.jet(&[p, j, k]).truncate(q)));
                                acc = acc.sub(&ga(p, m, j).mul(&t.jet(&[i, p, k]).truncate(q)));
                                acc = acc.sub(&ga(p, m, k).mul(&t.jet(&[i, j, p]).truncate(q)));
                            }
                            jets.push(acc);
                        }
                    }
                }
            }
            Ok(EvalTensor::new(n, Valence { up: 1, down: 3 }, q, jets))
        }
        (1, 1) => {
            for i in 0..n {
                for m in 0..n {
                    for j in 0..n {
                        let mut acc = t.jet(&[i, j]).derivative(m);
                        for p in 0..n {
                            acc = acc.add(&ga(i, m, p).mul(&t.jet(&[p, j]).truncate(q)));
                            acc = acc.sub(&ga(p, m, j).mul(&t.jet(&[i, p]).truncate(q)));
                        }
                        jets.push(acc);
                    }
                }
            }
            Ok(EvalTensor::new(n, Valence { up: 1, down: 2 }, q, jets))
        }
        (1, 0) => {
            for i in 0..n {
                for m in 0..n {
                    let mut acc = t.jet(&[i]).derivative(m);
                    for p in 0..n {
                        acc = acc.add(&ga(i, m, p).mul(&t.jet(&[p]).truncate(q)));
                    }
                    jets.push(acc);
                }
            }
            Ok(EvalTensor::new(n, Valence::ENDOMORPHISM, q, jets))
        }
        (0, 2) => {
            for m in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = t.jet(&[i, j]).derivative(m);
                        for p in 0..n {
                            acc = acc.sub(&ga(p, m, i).mul(&t.jet(&[p, j]).truncate(q)));
                            acc = acc.sub(&ga(p, m, j).mul(&t.jet(&[i, p]).truncate(q)));
                        }
                        jets.push(acc);
                    }
                }
            }
            Ok(EvalTensor::new(n, Valence { up: 0, down: 3 }, q, jets))
        }
        (up, down) => Err(Error::InvalidArgument(format!(
            "covariant derivative not implemented for valence ({up},{down})"
        ))),
    }
}

/// Lie derivative of structure constants along a vector field:
/// `(L_X c)^i_{jk} = X^m ∂_m c^i_{jk} − c^m_{jk} ∂_m X^i + c^i_{mk} ∂_j X^m + c^i_{jm} ∂_k X^m`.
pub fn lie_derivative_c(x: &EvalTensor, c: &EvalTensor) -> EvalTensor {
    let n = c.n();
    assert_eq!(x.n(), n);
    assert_eq!(x.valence(), Valence::VECTOR);
    assert_eq!(c.valence(), Valence::PRODUCT);
    let q = x.order().min(c.order()) - 1;
    let mut jets = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = Jet::constant(n, q, 0.0);
                for m in 0..n {
                    let xm = x.jet(&[m]).truncate(q);
                    acc = acc.add(&xm.mul(&c.jet(&[i, j, k]).truncate(q + 1).derivative(m)));
                    acc = acc.sub(
                        &c.jet(&[m, j, k])
                            .truncate(q)
                            .mul(&x.jet(&[i]).truncate(q + 1).derivative(m)),
                    );
                    acc = acc.add(
                        &c.jet(&[i, m, k])
                            .truncate(q)
                            .mul(&x.jet(&[m]).truncate(q + 1).derivative(j)),
                    );
                    acc = acc.add(
                        &c.jet(&[i, j, m])
                            .truncate(q)
                            .mul(&x.jet(&[m]).truncate(q + 1).derivative(k)),
                    );
                }
                jets.push(acc);
            }
        }
    }
    EvalTensor::new(n, Valence::PRODUCT, q, jets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::expr::{ExprContext, FieldExpr};
    use crate::tensor::TensorEntry;

    fn chart(names: &[&str]) -> Chart {
        Chart::new(names.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn tensor(
        names: &[&str],
        valence: Valence,
        entries: &[(&[usize], &str)],
        sym: bool,
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
        ChartTensor::from_entries(ch, valence, &es, sym).unwrap().0
    }

    fn polar_metric() -> ChartTensor {
        tensor(
            &["r1", "r2"],
            Valence::METRIC,
            &[(&[0, 0], "1"), (&[1, 1], "r1^2")],
            true,
        )
    }

    #[test]
    fn polar_christoffels_match_textbook_values() {
        let conn = Connection::LeviCivita {
            metric: polar_metric(),
        };
        let g = conn.gamma(&[1.7, 0.4], 1, &HashMap::new()).unwrap();
        assert!((g.v(&[0, 1, 1]) - (-1.7)).abs() < 1e-12); // Γ^1_22 = -r1
        assert!((g.v(&[1, 0, 1]) - 1.0 / 1.7).abs() < 1e-12); // Γ^2_12 = 1/r1
        assert!((g.v(&[1, 1, 0]) - 1.0 / 1.7).abs() < 1e-12);
        assert!(g.v(&[0, 0, 0]).abs() < 1e-12);
        assert!(g.v(&[0, 0, 1]).abs() < 1e-12);
        assert!(g.v(&[1, 1, 1]).abs() < 1e-12);
    }

    #[test]
    fn flat_metric_in_curved_coordinates_has_zero_curvature() {
        let conn = Connection::LeviCivita {
            metric: polar_metric(),
        };
        for p in [[1.3, 0.2], [0.8, -1.1], [2.5, 3.0]] {
            let g = conn.gamma(&p, 1, &HashMap::new()).unwrap();
            let r = curvature(&g);
            assert!(r.max_abs() < 1e-12, "R = {} at {:?}", r.max_abs(), p);
        }
    }

    #[test]
    fn levi_civita_is_metric_and_torsion_free() {
        let metric = tensor(
            &["u1", "u2"],
            Valence::METRIC,
            &[
                (&[0, 0], "1 + u1^2"),
                (&[0, 1], "u1*u2"),
                (&[1, 1], "2 + sin(u2)"),
            ],
            true,
        );
        let conn = Connection::LeviCivita {
            metric: metric.clone(),
        };
        let x = [0.6, -0.3];
        let gamma = conn.gamma(&x, 1, &HashMap::new()).unwrap();
        let g = metric.eval(&x, 2, &HashMap::new()).unwrap();
        let nabla_g = covariant_derivative(&g, &gamma).unwrap();
        for m in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(nabla_g.v(&[m, i, j]).abs() < 1e-12);
                }
            }
        }
        let t = torsion(&gamma);
        assert!(t.max_abs_value() < 1e-12);
    }

    #[test]
    fn curvature_is_antisymmetric_in_the_plane_indices() {
        let gamma_t = tensor(
            &["u1", "u2"],
            Valence::PRODUCT,
            &[
                (&[0, 0, 0], "u1*u2"),
                (&[0, 1, 1], "u2^2"),
                (&[1, 0, 1], "sin(u1)"),
                (&[1, 1, 0], "3"),
                (&[1, 1, 1], "u1 - u2"),
            ],
            false,
        );
        let conn = Connection::Expressions { gamma: gamma_t };
        let g = conn.gamma(&[0.9, 1.4], 1, &HashMap::new()).unwrap();
        let r = curvature(&g);
        assert!(r.max_abs() > 0.1, "generic Γ should be curved");
        assert!(r.antisymmetry_residual() < 1e-12);
    }

    #[test]
    fn covariant_derivative_with_zero_connection_is_plain_derivative() {
        let x = tensor(
            &["u1", "u2"],
            Valence::VECTOR,
            &[(&[0], "u1"), (&[1], "u2")],
            false,
        );
        let conn = Connection::Zero { dim: 2 };
        let gamma = conn.gamma(&[0.2, 0.8], 1, &HashMap::new()).unwrap();
        let xe = x.eval(&[0.2, 0.8], 2, &HashMap::new()).unwrap();
        let nx = covariant_derivative(&xe, &gamma).unwrap();
        for i in 0..2 {
            for m in 0..2 {
                let expect = if i == m { 1.0 } else { 0.0 };
                assert!((nx.v(&[i, m]) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lie_derivative_keeps_only_the_transport_term_for_constant_fields() {
        // c^1_22 = u2 (symmetrized), c^1_11 = 1, c^2_12 = 1; X = ∂_2 constant:
        // (L_X c)^1_22 = ∂_2 c^1_22 = 1 and every other component vanishes.
        let c = tensor(
            &["u1", "u2"],
            Valence::PRODUCT,
            &[(&[0, 0, 0], "1"), (&[0, 1, 1], "u2"), (&[1, 0, 1], "1")],
            true,
        );
        let x = tensor(&["u1", "u2"], Valence::VECTOR, &[(&[1], "1")], false);
        let p = [0.3, 1.2];
        let ce = c.eval(&p, 2, &HashMap::new()).unwrap();
        let xe = x.eval(&p, 2, &HashMap::new()).unwrap();
        let lie = lie_derivative_c(&xe, &ce);
        assert!((lie.v(&[0, 1, 1]) - 1.0).abs() < 1e-13);
        let mut others = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    if (i, j, k) != (0, 1, 1) {
                        others = others.max(lie.v(&[i, j, k]).abs());
                    }
                }
            }
        }
        assert!(others < 1e-13);
    }

    #[test]
    fn connection_pencil_shifts_christoffels_linearly() {
        let c = tensor(
            &["u1", "u2"],
            Valence::PRODUCT,
            &[(&[0, 1, 1], "u2")],
            true,
        );
        let p = [0.5, 2.0];
        let gamma = Connection::Zero { dim: 2 }
            .gamma(&p, 1, &HashMap::new())
            .unwrap();
        let ce = c.eval(&p, 1, &HashMap::new()).unwrap();
        let tilted = deformed_gamma(&gamma, &ce, -1.5);
        assert!((tilted.v(&[0, 1, 1]) - (-3.0)).abs() < 1e-13);
        assert!((tilted.d(1, &[0, 1, 1]) - (-1.5)).abs() < 1e-13);
    }
}
