//! Hydrodynamic flows `u_t = V_x(u) u_x` with `(V_x)^i_j = c^i_{jk} x^k`:
//! right-hand sides, the exact pointwise criterion for two flows to
//! commute, the first-order sufficient condition, and an independent
//! brute-force commutator oracle on second-order jets of `u(x)`.
//!
//! Commutativity of two quasilinear first-order flows is a polynomial
//! identity in `(u, u_x, u_xx)`, so all checks here are pointwise and exact
//! up to rounding — no time stepping and no spatial grid anywhere.

use crate::algebra;
use crate::chart::{unit_draws, Chart};
use crate::geometry::lie_derivative_c;
use crate::jet::{Jet, JetShape};
use crate::residual::ResidualSample;
use crate::series::SeriesTensor;
use crate::tensor::{EvalTensor, TensorSource, Valence};
use crate::Result;

/// Second-order jet of a field `u(x)` at one spatial point.
#[derive(Debug, Clone)]
pub struct JetState {
    pub u0: Vec<f64>,
    pub ux: Vec<f64>,
    pub uxx: Vec<f64>,
}

impl JetState {
    pub fn new(u0: Vec<f64>, ux: Vec<f64>, uxx: Vec<f64>) -> JetState {
        assert_eq!(u0.len(), ux.len());
        assert_eq!(u0.len(), uxx.len());
        JetState { u0, ux, uxx }
    }

    /// Deterministic random state: `u0` from the box sampler is supplied by
    /// the caller; `ux` and `uxx` components are uniform in [−1, 1].
    pub fn random(u0: Vec<f64>, seed: u64) -> JetState {
        let n = u0.len();
        let draws = unit_draws(seed, 2 * n);
        JetState {
            u0,
            ux: draws[..n].to_vec(),
            uxx: draws[n..].to_vec(),
        }
    }
}

/// A hydrodynamic flow defined by a product tensor and a vector field.
pub struct HydroFlow<'a> {
    pub c: &'a dyn TensorSource,
    pub x: &'a dyn TensorSource,
}

impl HydroFlow<'_> {
    /// Row-major values of `(V_x)^i_j = c^i_{jk} x^k` at a point.
    pub fn v_values(&self, u0: &[f64]) -> Result<Vec<f64>> {
        let c = self.c.eval(u0, 0)?;
        let x = self.x.eval(u0, 0)?;
        let n = c.n();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    v[i * n + j] += c.v(&[i, j, k]) * x.v(&[k]);
                }
            }
        }
        Ok(v)
    }

    /// Right-hand side `V_x(u0) · ux`.
    pub fn rhs(&self, s: &JetState) -> Result<Vec<f64>> {
        let n = s.u0.len();
        let v = self.v_values(&s.u0)?;
        Ok((0..n)
            .map(|i| (0..n).map(|j| v[i * n + j] * s.ux[j]).sum())
            .collect())
    }
}

/// Right-hand side of the flow at a jet state.
pub fn flow_rhs(flow: &HydroFlow, s: &JetState) -> Result<Vec<f64>> {
    flow.rhs(s)
}

/// Lie bracket values `[x, y]^q = x^m ∂_m y^q − y^m ∂_m x^q` from order-1
/// jets of the two fields at one point.
fn bracket_values(x: &EvalTensor, y: &EvalTensor) -> Vec<f64> {
    let n = x.n();
    (0..n)
        .map(|q| {
            (0..n)
                .map(|m| x.v(&[m]) * y.d(m, &[q]) - y.v(&[m]) * x.d(m, &[q]))
                .sum()
        })
        .collect()
}

/// The common core of both commutativity conditions:
/// `B^i_j = (Lie_x c)^i_{jq} y^q − (Lie_y c)^i_{jq} x^q + c^i_{jq} [x,y]^q`
/// together with the largest absolute summand that entered any component.
fn commutativity_core(c: &EvalTensor, x: &EvalTensor, y: &EvalTensor) -> (Vec<f64>, f64) {
    let n = c.n();
    let lx = lie_derivative_c(x, c);
    let ly = lie_derivative_c(y, c);
    let br = bracket_values(x, y);
    let mut b = vec![0.0; n * n];
    let mut scale = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for q in 0..n {
                let t1 = lx.v(&[i, j, q]) * y.v(&[q]);
                let t2 = -ly.v(&[i, j, q]) * x.v(&[q]);
                let t3 = c.v(&[i, j, q]) * br[q];
                acc += t1 + t2 + t3;
                scale = scale.max(t1.abs()).max(t2.abs()).max(t3.abs());
            }
            b[i * n + j] = acc;
        }
    }
    (b, scale)
}

/// Exact pointwise criterion for the flows of `x` and `y` to commute: the
/// polarized identity
///
/// ```text
/// (c^r_{is} B^i_j + c^r_{ij} B^i_s) Z^j W^s = 0,
/// B^i_j = (Lie_x c)^i_{jq} y^q − (Lie_y c)^i_{jq} x^q + c^i_{jq} [x,y]^q
/// ```
///
/// evaluated on the test vectors `z`, `w` when given, and over all basis
/// pairs `(j, s)` otherwise. Inputs are order-≥1 jets at one point.
pub fn iff_commutativity_residual(
    c: &EvalTensor,
    x: &EvalTensor,
    y: &EvalTensor,
    z: Option<&[f64]>,
    w: Option<&[f64]>,
) -> ResidualSample {
    let n = c.n();
    let (b, core_scale) = commutativity_core(c, x, y);
    let mut worst = ResidualSample::ZERO;
    let pair = |j: usize, s: usize, r: usize| -> (f64, f64) {
        let mut acc = 0.0;
        let mut scale = 0.0_f64;
        for i in 0..n {
            let t1 = c.v(&[r, i, s]) * b[i * n + j];
            let t2 = c.v(&[r, i, j]) * b[i * n + s];
            acc += t1 + t2;
            scale = scale.max(t1.abs()).max(t2.abs());
        }
        (acc, scale)
    };
    match (z, w) {
        (Some(z), Some(w)) => {
            for r in 0..n {
                let mut acc = 0.0;
                let mut scale = 0.0_f64;
                for j in 0..n {
                    for s in 0..n {
                        let (p, _) = pair(j, s, r);
                        let t = p * z[j] * w[s];
                        acc += t;
                        scale = scale.max(t.abs());
                    }
                }
                worst = worst.merge(ResidualSample::new(acc.abs(), scale.max(core_scale)));
            }
        }
        _ => {
            for r in 0..n {
                for j in 0..n {
                    for s in 0..n {
                        let (p, scale) = pair(j, s, r);
                        worst =
                            worst.merge(ResidualSample::new(p.abs(), scale.max(core_scale)));
                    }
                }
            }
        }
    }
    worst
}

/// Result of the first-order sufficient condition for commutativity.
#[derive(Debug, Clone, Copy)]
pub struct SufficientCondition {
    /// Residual of `(Lie_x c)(y, ·) − (Lie_y c)(x, ·) + c([x,y], ·) = 0`.
    pub residual: ResidualSample,
    /// Largest componentwise difference between that form and the
    /// equivalent endomorphism form `Lie_x V_y − Lie_y V_x − V_[x,y]`; the
    /// two are the same tensor, so this certifies the implementation.
    pub cross_check: f64,
}

/// Lie derivative values of a (1,1) tensor along x:
/// `(Lie_x t)^i_j = x^m ∂_m t^i_j − t^m_j ∂_m x^i + t^i_m ∂_j x^m`.
fn lie_endomorphism_values(x: &EvalTensor, t: &EvalTensor) -> Vec<f64> {
    let n = x.n();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for m in 0..n {
                acc += x.v(&[m]) * t.d(m, &[i, j]) - t.v(&[m, j]) * x.d(m, &[i])
                    + t.v(&[i, m]) * x.d(j, &[m]);
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// First-order sufficient condition for two flows to commute, with the
/// equivalent endomorphism form evaluated independently as a cross-check.
pub fn sufficient_condition_residual(
    c: &EvalTensor,
    x: &EvalTensor,
    y: &EvalTensor,
) -> SufficientCondition {
    let n = c.n();
    let (b, scale) = commutativity_core(c, x, y);
    let mut worst = ResidualSample::ZERO;
    for v in &b {
        worst = worst.merge(ResidualSample::new(v.abs(), scale));
    }

    // Independent evaluation: Lie_x V_y − Lie_y V_x − V_[x,y].
    let vx = algebra::v_field(c, x);
    let vy = algebra::v_field(c, y);
    let lxy = lie_endomorphism_values(x, &vy);
    let lyx = lie_endomorphism_values(y, &vx);
    let br = bracket_values(x, y);
    let mut cross = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let mut vbr = 0.0;
            for q in 0..n {
                vbr += c.v(&[i, j, q]) * br[q];
            }
            let other = lxy[i * n + j] - lyx[i * n + j] - vbr;
            cross = cross.max((other - b[i * n + j]).abs());
        }
    }
    SufficientCondition {
        residual: worst,
        cross_check: cross,
    }
}

/// Brute-force commutator of the two evolutionary flows on a second-order
/// jet of `u(x)`: expands `∂_τ ∂_t u − ∂_t ∂_τ u` with `u_t = V_x u_x`,
/// `u_τ = V_y u_x` via the chain rule. Zero for every state iff the flows
/// commute. `c`, `x`, `y` are order-≥1 jets at `s.u0`.
pub fn oracle_flow_commutator(
    c: &EvalTensor,
    x: &EvalTensor,
    y: &EvalTensor,
    s: &JetState,
) -> Vec<f64> {
    let n = c.n();
    let vx = algebra::v_field(c, x);
    let vy = algebra::v_field(c, y);
    let dir = |va: &EvalTensor, vb: &EvalTensor| -> Vec<f64> {
        // ∂ of (V_a u_x) along the flow of b:
        //   (∂_m V_a^i_j) V_b^m_k u^k_x u^j_x  +  V_a^i_j (∂_m V_b^j_k) u^m_x u^k_x
        // + V_a^i_j V_b^j_k u^k_xx
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        acc += va.d(m, &[i, j]) * vb.v(&[m, k]) * s.ux[k] * s.ux[j];
                        acc += va.v(&[i, j]) * vb.d(m, &[j, k]) * s.ux[m] * s.ux[k];
                    }
                    acc += va.v(&[i, j]) * vb.v(&[j, k]) * s.uxx[k];
                }
            }
            out[i] = acc;
        }
        out
    };
    let a = dir(&vx, &vy);
    let b = dir(&vy, &vx);
    (0..n).map(|i| a[i] - b[i]).collect()
}

/// Random vector field with polynomial components of the given degree,
/// coefficients uniform in [−1, 1], reproducible from the seed. Stored as a
/// polynomial around the origin, so it can be evaluated exactly anywhere.
pub fn random_polynomial_field(chart: &Chart, degree: usize, seed: u64) -> SeriesTensor {
    let n = chart.dim();
    let len = JetShape::get(n, degree).len();
    let draws = unit_draws(seed, n * len);
    let comps: Vec<Jet> = (0..n)
        .map(|i| Jet::from_coeffs(n, degree, draws[i * len..(i + 1) * len].to_vec()))
        .collect();
    SeriesTensor::new(chart.clone(), Valence::VECTOR, vec![0.0; n], comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residual::Tolerance;
    use crate::tensor::ChartTensor;
    use crate::testsupport::{broken_hm_c, canonical_c, potential2_c, tensor};
    use std::collections::HashMap;

    fn const_field(chart_names: &[&str], values: &[&str]) -> ChartTensor {
        let entries: Vec<(Vec<usize>, &str)> = values
            .iter()
            .enumerate()
            .map(|(i, s)| (vec![i], *s))
            .collect();
        let borrowed: Vec<(&[usize], &str)> = entries
            .iter()
            .map(|(idx, s)| (idx.as_slice(), *s))
            .collect();
        tensor(chart_names, Valence::VECTOR, &borrowed, false)
    }

    #[test]
    fn unity_flow_is_translation_and_zero_slope_is_stationary() {
        let c = canonical_c(3);
        let e = const_field(&["r1", "r2", "r3"], &["1", "1", "1"]);
        let flow = HydroFlow { c: &c, x: &e };
        let s = JetState::new(
            vec![0.4, -0.2, 1.1],
            vec![0.3, 0.7, -0.5],
            vec![0.0, 0.0, 0.0],
        );
        let rhs = flow.rhs(&s).unwrap();
        for i in 0..3 {
            assert!((rhs[i] - s.ux[i]).abs() < 1e-15);
        }
        let s0 = JetState::new(vec![0.4, -0.2, 1.1], vec![0.0; 3], vec![0.0; 3]);
        assert_eq!(flow_rhs(&flow, &s0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn potential_flow_rhs_matches_hand_value() {
        let c = potential2_c();
        let x = const_field(&["u1", "u2"], &["0", "1"]);
        let flow = HydroFlow { c: &c, x: &x };
        // V = [[0, u2], [1, 0]] at u2 = 1.2 acting on ux = (1, 0).
        let s = JetState::new(vec![0.3, 1.2], vec![1.0, 0.0], vec![0.0, 0.0]);
        let rhs = flow.rhs(&s).unwrap();
        assert!(rhs[0].abs() < 1e-15);
        assert!((rhs[1] - 1.0).abs() < 1e-15);
    }

    fn eval_all(
        c: &ChartTensor,
        x: &dyn TensorSource,
        y: &dyn TensorSource,
        u0: &[f64],
    ) -> (EvalTensor, EvalTensor, EvalTensor) {
        (
            c.eval(u0, 1, &HashMap::new()).unwrap(),
            x.eval(u0, 1).unwrap(),
            y.eval(u0, 1).unwrap(),
        )
    }

    #[test]
    fn criterion_vanishes_for_identical_fields_and_flat_pairs() {
        let c = potential2_c();
        let chart = c.chart().clone();
        let x = random_polynomial_field(&chart, 2, 5);
        let u0 = [0.3, 1.2];
        let (ce, xe, _) = eval_all(&c, &x, &x, &u0);
        let r = iff_commutativity_residual(&ce, &xe, &xe, None, None);
        assert_eq!(r.residual, 0.0, "antisymmetric in (x, y)");

        // Primary pair: the constant coordinate fields.
        let e1 = const_field(&["u1", "u2"], &["1", "0"]);
        let e2 = const_field(&["u1", "u2"], &["0", "1"]);
        for u0 in [[0.3, 1.2], [0.1, 0.8], [0.5, 1.5]] {
            let (ce, xe, ye) = eval_all(&c, &e1, &e2, &u0);
            let r = iff_commutativity_residual(&ce, &xe, &ye, None, None);
            assert!(r.residual <= 1e-9 * r.scale.max(1.0), "{r:?}");
            // The polarized form with explicit test vectors agrees.
            let rz = iff_commutativity_residual(&ce, &xe, &ye, Some(&[1.0, -0.3]), Some(&[0.7, 0.2]));
            assert!(rz.residual <= 1e-9 * rz.scale.max(1.0), "{rz:?}");
        }
    }

    #[test]
    fn generic_pair_fails_criterion() {
        let c = potential2_c();
        let e2 = const_field(&["u1", "u2"], &["0", "1"]);
        let swap = tensor(
            &["u1", "u2"],
            Valence::VECTOR,
            &[(&[0], "u2"), (&[1], "u1")],
            false,
        );
        let (ce, xe, ye) = eval_all(&c, &e2, &swap, &[0.3, 1.2]);
        let r = iff_commutativity_residual(&ce, &xe, &ye, None, None);
        assert!(r.residual > 1e-3, "{r:?}");
    }

    #[test]
    fn sufficient_condition_vanishes_on_flat_pair_and_cross_check_agrees() {
        let c = potential2_c();
        let e1 = const_field(&["u1", "u2"], &["1", "0"]);
        let e2 = const_field(&["u1", "u2"], &["0", "1"]);
        let (ce, xe, ye) = eval_all(&c, &e1, &e2, &[0.3, 1.2]);
        let sc = sufficient_condition_residual(&ce, &xe, &ye);
        assert!(sc.residual.residual <= 1e-12);
        assert!(sc.cross_check <= 1e-12);

        // Cross-check must also hold on a non-commuting generic pair.
        let chart = c.chart().clone();
        let x = random_polynomial_field(&chart, 2, 11);
        let y = random_polynomial_field(&chart, 2, 12);
        let (ce, xe, ye) = eval_all(&c, &x, &y, &[0.3, 1.2]);
        let sc = sufficient_condition_residual(&ce, &xe, &ye);
        assert!(
            sc.cross_check <= 1e-12 * sc.residual.scale.max(1.0),
            "{sc:?}"
        );
    }

    #[test]
    fn sufficient_condition_implies_criterion_on_random_pairs() {
        let c = potential2_c();
        let chart = c.chart().clone();
        let tol = Tolerance::default();
        for seed in 0..20u64 {
            let x = random_polynomial_field(&chart, 2, 100 + seed);
            let y = random_polynomial_field(&chart, 2, 200 + seed);
            for u0 in [[0.31, 1.23], [0.12, 0.87]] {
                let (ce, xe, ye) = eval_all(&c, &x, &y, &u0);
                let sc = sufficient_condition_residual(&ce, &xe, &ye);
                if tol.passes(&sc.residual) {
                    let r = iff_commutativity_residual(&ce, &xe, &ye, None, None);
                    assert!(tol.passes(&r), "sufficient ⇏ criterion: {sc:?} vs {r:?}");
                }
            }
        }
    }

    #[test]
    fn oracle_agrees_with_criterion_verdict_on_many_pairs() {
        // 40 generic pairs plus 10 known-commuting pairs (unity flow against
        // arbitrary fields); the pass/fail verdicts of the exact criterion
        // at 16 sampled points and of the brute-force oracle at 16 random
        // jet states must coincide on every pair.
        let c = potential2_c();
        let chart = c.chart().clone();
        let sbox = crate::chart::SampleBox::new(vec![(0.1, 0.5), (0.8, 1.5)]).unwrap();
        let points = sbox.sample(42, 16);
        let unity = const_field(&["u1", "u2"], &["1", "0"]);

        for pair in 0..50u64 {
            let y = random_polynomial_field(&chart, 2, 1000 + pair);
            let generic = random_polynomial_field(&chart, 2, 2000 + pair);
            let x: &dyn TensorSource = if pair < 10 { &unity } else { &generic };

            let mut crit = ResidualSample::ZERO;
            let mut orac = ResidualSample::ZERO;
            for (k, u0) in points.iter().enumerate() {
                let (ce, xe, ye) = eval_all(&c, x, &y, u0);
                crit = crit.merge(iff_commutativity_residual(&ce, &xe, &ye, None, None));
                let s = JetState::random(u0.clone(), 3000 + pair * 16 + k as u64);
                let com = oracle_flow_commutator(&ce, &xe, &ye, &s);
                let m = com.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                orac = orac.merge(ResidualSample::new(m, crit.scale.max(1.0)));
            }
            let tol = Tolerance::new(1e-8, 1e-8);
            assert_eq!(
                tol.passes(&crit),
                tol.passes(&orac),
                "verdicts disagree on pair {pair}: criterion {crit:?}, oracle {orac:?}"
            );
            if pair < 10 {
                assert!(tol.passes(&crit), "unity pair must commute: {crit:?}");
            }
        }
    }

    #[test]
    fn oracle_vanishes_for_primary_pair_and_flags_failing_pair() {
        let c = potential2_c();
        let e1 = const_field(&["u1", "u2"], &["1", "0"]);
        let e2 = const_field(&["u1", "u2"], &["0", "1"]);
        for k in 0..8u64 {
            let u0 = vec![0.2 + 0.03 * k as f64, 0.9 + 0.05 * k as f64];
            let (ce, xe, ye) = eval_all(&c, &e1, &e2, &u0);
            let s = JetState::random(u0, 400 + k);
            let com = oracle_flow_commutator(&ce, &xe, &ye, &s);
            for v in &com {
                assert!(v.abs() <= 1e-12, "{com:?}");
            }
        }
        let swap = tensor(
            &["u1", "u2"],
            Valence::VECTOR,
            &[(&[0], "u2"), (&[1], "u1")],
            false,
        );
        let mut witness = 0.0_f64;
        for k in 0..8u64 {
            let u0 = vec![0.2 + 0.03 * k as f64, 0.9 + 0.05 * k as f64];
            let (ce, xe, ye) = eval_all(&c, &e2, &swap, &u0);
            let s = JetState::random(u0, 500 + k);
            let com = oracle_flow_commutator(&ce, &xe, &ye, &s);
            witness = witness.max(com.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
        }
        assert!(witness > 1e-3, "oracle failed to flag non-commuting pair");
    }

    #[test]
    fn bracketed_commutator_form_equals_quasi_invariance_form() {
        // [z∘x, y] + [x, z∘y] − [x,z]∘y − [x,y]∘z − x∘[z,y] equals
        // (Lie_x c)(y, z) − (Lie_y c)(x, z) + [x,y]∘z for any commutative
        // product and any fields; checked on random jets.
        let n = 2;
        let order = 3;
        let len = JetShape::get(n, order).len();
        for seed in 0..5u64 {
            let draws = unit_draws(7000 + seed, len * (n * n * n + 3 * n));
            let mut it = draws.into_iter();
            let mut take = || {
                let coeffs: Vec<f64> = (0..len).map(|_| it.next().unwrap()).collect();
                Jet::from_coeffs(n, order, coeffs)
            };
            let mut jets = vec![Jet::constant(n, order, 0.0); n * n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in j..n {
                        let jet = take();
                        jets[crate::tensor::flat_index(n, &[i, j, k])] = jet.clone();
                        jets[crate::tensor::flat_index(n, &[i, k, j])] = jet;
                    }
                }
            }
            let c = EvalTensor::new(n, Valence::PRODUCT, order, jets);
            let x: Vec<Jet> = (0..n).map(|_| take()).collect();
            let y: Vec<Jet> = (0..n).map(|_| take()).collect();
            let z: Vec<Jet> = (0..n).map(|_| take()).collect();

            let prod = |a: &[Jet], b: &[Jet]| algebra::field_product(&c, a, b);
            let br = |a: &[Jet], b: &[Jet]| algebra::field_bracket(a, b);
            let lhs: Vec<f64> = {
                let t1 = br(&prod(&z, &x), &y);
                let t2 = br(&x, &prod(&z, &y));
                let t3 = prod(&br(&x, &z), &y);
                let t4 = prod(&br(&x, &y), &z);
                let t5 = prod(&x, &br(&z, &y));
                (0..n)
                    .map(|i| {
                        t1[i].value() + t2[i].value()
                            - t3[i].value()
                            - t4[i].value()
                            - t5[i].value()
                    })
                    .collect()
            };

            // Right-hand side from the Lie-derivative components.
            let xe = EvalTensor::new(n, Valence::VECTOR, order, x.clone());
            let ye = EvalTensor::new(n, Valence::VECTOR, order, y.clone());
            let lx = lie_derivative_c(&xe, &c);
            let ly = lie_derivative_c(&ye, &c);
            let brxy = br(&x, &y);
            let rhs: Vec<f64> = (0..n)
                .map(|i| {
                    let mut acc = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            acc += (lx.v(&[i, p, q]) * y[p].value()
                                - ly.v(&[i, p, q]) * x[p].value())
                                * z[q].value();
                        }
                    }
                    for p in 0..n {
                        acc += {
                            let mut t = 0.0;
                            for q in 0..n {
                                t += c.v(&[i, p, q]) * z[q].value();
                            }
                            t * brxy[p].value()
                        };
                    }
                    acc
                })
                .collect();
            for i in 0..n {
                let scale = lhs[i].abs().max(rhs[i].abs()).max(1.0);
                assert!(
                    (lhs[i] - rhs[i]).abs() <= 1e-12 * scale,
                    "seed {seed} component {i}: {lhs:?} vs {rhs:?}"
                );
            }
        }
    }

    #[test]
    fn criterion_exactness_requires_integrable_structure() {
        // The pointwise criterion is equivalent to flow commutativity only
        // when the product satisfies the six-term integrability identity.
        // On the non-integrable 3d witness, the unity flow (V_e = Id)
        // commutes with every flow — the oracle vanishes identically — yet
        // the criterion fires: B^1_2 = (∂_1 c^1_{22} + ∂_3 c^1_{22}) g^2 ≠ 0.
        let c = broken_hm_c();
        let names = ["u1", "u2", "u3"];
        let e = const_field(&names, &["1", "0", "1"]);
        let g = tensor(
            &names,
            Valence::VECTOR,
            &[(&[0], "u2"), (&[1], "u3"), (&[2], "u1")],
            false,
        );
        let u0 = [0.7, 1.1, 0.9];
        let (ce, xe, ye) = eval_all(&c, &e, &g, &u0);
        for k in 0..6u64 {
            let s = JetState::random(u0.to_vec(), 600 + k);
            let com = oracle_flow_commutator(&ce, &xe, &ye, &s);
            for v in &com {
                assert!(v.abs() <= 1e-12, "unity flow must commute: {com:?}");
            }
        }
        let r = iff_commutativity_residual(&ce, &xe, &ye, None, None);
        let expected = (2.0 * u0[0] + u0[1]) * u0[2]; // (∂₁f + ∂₃f) g² at u0
        assert!(
            r.residual >= expected - 1e-9,
            "criterion should fire on non-integrable structure: {r:?}"
        );

        // Identical fields still commute and pass the criterion exactly,
        // whatever the structure: the condition is antisymmetric in (x, y).
        let (ce, xe, _) = eval_all(&c, &g, &g, &u0);
        let r = iff_commutativity_residual(&ce, &xe, &xe, None, None);
        assert_eq!(r.residual, 0.0);
    }
}
