//! Pointwise checks of a multiplication tensor `c^i_{jk}` on tangent spaces:
//! associativity, commutativity, the Hertling–Manin first-order
//! integrability identity, Nijenhuis/Haantjes torsion of the induced
//! endomorphisms, diagonal (canonical-coordinate) form, and the unity
//! vector field.
//!
//! All checks consume an [`EvalTensor`] — jets of the structure constants at
//! one point — and return [`ResidualSample`]s whose scale is the largest
//! absolute summand, so callers apply one uniform pass/fail rule.

use crate::jet::Jet;
use crate::linalg;
use crate::residual::ResidualSample;
use crate::tensor::{EvalTensor, Valence};
use crate::{Error, Result};

/// `(x ∘ y)^i = c^i_{jk} x^j y^k` on plain values.
pub fn product_values(c: &EvalTensor, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = c.n();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            for k in 0..n {
                acc += c.v(&[i, j, k]) * x[j] * y[k];
            }
        }
        out[i] = acc;
    }
    out
}

fn min_order(sets: &[&[Jet]]) -> usize {
    sets.iter()
        .flat_map(|s| s.iter().map(|j| j.order()))
        .min()
        .expect("at least one jet")
}

fn trunc_all(v: &[Jet], order: usize) -> Vec<Jet> {
    v.iter().map(|j| j.truncate(order)).collect()
}

/// A vector field with constant components, as jets of a given shape.
pub fn constant_field(dim: usize, order: usize, values: &[f64]) -> Vec<Jet> {
    values
        .iter()
        .map(|&v| Jet::constant(dim, order, v))
        .collect()
}

/// Jet-level product of two vector fields: `(x ∘ y)^i = c^i_{jk} x^j y^k`.
/// The result is truncated to the smallest operand order.
pub fn field_product(c: &EvalTensor, x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    let n = c.n();
    let q = min_order(&[x, y]).min(c.order());
    let x = trunc_all(x, q);
    let y = trunc_all(y, q);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = Jet::constant(n, q, 0.0);
        for j in 0..n {
            for k in 0..n {
                let cj = c.jet(&[i, j, k]).truncate(q);
                acc = &acc + &(&cj * &(&x[j] * &y[k]));
            }
        }
        out.push(acc);
    }
    out
}

/// Jet-level Lie bracket `[x, y]^i = x^m ∂_m y^i − y^m ∂_m x^i`.
/// Drops one jet order.
pub fn field_bracket(x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    let n = x.len();
    let q = min_order(&[x, y]);
    assert!(q >= 1, "field_bracket needs order >= 1 jets");
    let xt = trunc_all(x, q - 1);
    let yt = trunc_all(y, q - 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = Jet::constant(n, q - 1, 0.0);
        for m in 0..n {
            let dyi = y[i].truncate(q).derivative(m);
            let dxi = x[i].truncate(q).derivative(m);
            acc = &acc + &(&(&xt[m] * &dyi) - &(&yt[m] * &dxi));
        }
        out.push(acc);
    }
    out
}

/// Apply a (1,1) tensor to a vector field at jet level: `(v x)^i = v^i_m x^m`.
pub fn endo_apply(v: &EvalTensor, x: &[Jet]) -> Vec<Jet> {
    let n = v.n();
    let q = min_order(&[x]).min(v.order());
    let x = trunc_all(x, q);
    (0..n)
        .map(|i| {
            let mut acc = Jet::constant(n, q, 0.0);
            for m in 0..n {
                acc = &acc + &(&v.jet(&[i, m]).truncate(q) * &x[m]);
            }
            acc
        })
        .collect()
}

/// Associativity residual `c^m_{jk} c^i_{ml} − c^m_{kl} c^i_{jm}` over all
/// free indices (i, j, k, l), using value parts only.
pub fn associativity(c: &EvalTensor) -> ResidualSample {
    let n = c.n();
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = 0.0;
                    let mut scale = 0.0_f64;
                    for m in 0..n {
                        let t1 = c.v(&[m, j, k]) * c.v(&[i, m, l]);
                        let t2 = c.v(&[m, k, l]) * c.v(&[i, j, m]);
                        acc += t1 - t2;
                        scale = scale.max(t1.abs()).max(t2.abs());
                    }
                    worst = worst.merge(ResidualSample::new(acc.abs(), scale));
                }
            }
        }
    }
    worst
}

/// Commutativity residual `c^i_{jk} − c^i_{kj}`.
pub fn commutativity(c: &EvalTensor) -> ResidualSample {
    let n = c.n();
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = c.v(&[i, j, k]);
                let b = c.v(&[i, k, j]);
                worst = worst.merge(ResidualSample::new((a - b).abs(), a.abs().max(b.abs())));
            }
        }
    }
    worst
}

/// Six-term component form of the Hertling–Manin integrability identity:
///
/// ```text
/// (∂_s c^k_{jl}) c^s_{im} + (∂_j c^s_{im}) c^k_{sl} − (∂_s c^k_{im}) c^s_{jl}
/// − (∂_i c^s_{jl}) c^k_{sm} − (∂_m c^s_{jl}) c^k_{si} + (∂_l c^s_{im}) c^k_{sj} = 0
/// ```
///
/// free in (k; i, j, l, m), summed over s. For commutative `c` this is
/// equivalent to the nine-term operator identity checked by
/// [`hm_operator_bracket`]; the unit tests certify the transcription by
/// contracting the two against each other on a generic non-integrable
/// product.
pub fn hertling_manin(c: &EvalTensor) -> ResidualSample {
    assert!(c.order() >= 1, "hertling_manin needs order >= 1 jets");
    let n = c.n();
    let mut worst = ResidualSample::ZERO;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        let mut acc = 0.0;
                        let mut scale = 0.0_f64;
                        let mut push = |t: f64| {
                            acc += t;
                            scale = scale.max(t.abs());
                        };
                        for s in 0..n {
                            push(c.d(s, &[k, j, l]) * c.v(&[s, i, m]));
                            push(c.d(j, &[s, i, m]) * c.v(&[k, s, l]));
                            push(-c.d(s, &[k, i, m]) * c.v(&[s, j, l]));
                            push(-c.d(i, &[s, j, l]) * c.v(&[k, s, m]));
                            push(-c.d(m, &[s, j, l]) * c.v(&[k, s, i]));
                            push(c.d(l, &[s, i, m]) * c.v(&[k, s, j]));
                        }
                        worst = worst.merge(ResidualSample::new(acc.abs(), scale));
                    }
                }
            }
        }
    }
    worst
}

/// Value of the nine-term operator bracket
///
/// ```text
/// [X∘Y, Z∘W] − [X∘Y, Z]∘W − [X∘Y, W]∘Z − X∘[Y, Z∘W] + X∘([Y,Z]∘W)
/// + X∘([Y,W]∘Z) − Y∘[X, Z∘W] + Y∘([X,Z]∘W) + Y∘([X,W]∘Z)
/// ```
///
/// for vector fields given as jets. Needs order ≥ 2 (nested brackets of
/// products). Vanishing for all fields characterizes the integrable
/// (F-manifold) products.
pub fn hm_operator_bracket(
    c: &EvalTensor,
    x: &[Jet],
    y: &[Jet],
    z: &[Jet],
    w: &[Jet],
) -> Vec<f64> {
    let prod = |a: &[Jet], b: &[Jet]| field_product(c, a, b);
    let xy = prod(x, y);
    let zw = prod(z, w);
    let t1 = field_bracket(&xy, &zw);
    let t2 = prod(&field_bracket(&xy, z), w);
    let t3 = prod(&field_bracket(&xy, w), z);
    let t4 = prod(x, &field_bracket(y, &zw));
    let t5 = prod(x, &prod(&field_bracket(y, z), w));
    let t6 = prod(x, &prod(&field_bracket(y, w), z));
    let t7 = prod(y, &field_bracket(x, &zw));
    let t8 = prod(y, &prod(&field_bracket(x, z), w));
    let t9 = prod(y, &prod(&field_bracket(x, w), z));
    (0..c.n())
        .map(|i| {
            t1[i].value() - t2[i].value() - t3[i].value() - t4[i].value() + t5[i].value()
                + t6[i].value()
                - t7[i].value()
                + t8[i].value()
                + t9[i].value()
        })
        .collect()
}

/// Induced endomorphism `(V_z)^i_j = c^i_{jk} z^k` for a constant vector z.
pub fn v_endomorphism(c: &EvalTensor, z: &[f64]) -> EvalTensor {
    let n = c.n();
    let q = c.order();
    let mut jets = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::constant(n, q, 0.0);
            for k in 0..n {
                acc = &acc + &c.jet(&[i, j, k]).scale(z[k]);
            }
            jets.push(acc);
        }
    }
    EvalTensor::new(n, Valence::ENDOMORPHISM, q, jets)
}

/// Induced endomorphism `(V_x)^i_j = c^i_{jk} x^k` for a vector field x
/// given as jets alongside c.
pub fn v_field(c: &EvalTensor, x: &EvalTensor) -> EvalTensor {
    let n = c.n();
    let q = c.order().min(x.order());
    let mut jets = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::constant(n, q, 0.0);
            for k in 0..n {
                acc = &acc + &(&c.jet(&[i, j, k]).truncate(q) * &x.jet(&[k]).truncate(q));
            }
            jets.push(acc);
        }
    }
    EvalTensor::new(n, Valence::ENDOMORPHISM, q, jets)
}

/// Nijenhuis torsion of a (1,1) tensor field, as jets one order below `v`:
///
/// ```text
/// N^i_{jk} = v^m_j ∂_m v^i_k − v^m_k ∂_m v^i_j − v^i_m ∂_j v^m_k + v^i_m ∂_k v^m_j
/// ```
pub fn nijenhuis_tensor(v: &EvalTensor) -> EvalTensor {
    let n = v.n();
    let q = v.order();
    assert!(q >= 1, "nijenhuis_tensor needs order >= 1 jets");
    let t = |i: usize, j: usize| v.jet(&[i, j]).truncate(q - 1);
    let d = |i: usize, j: usize, axis: usize| v.jet(&[i, j]).derivative(axis);
    let mut jets = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = Jet::constant(n, q - 1, 0.0);
                for m in 0..n {
                    acc = &acc + &(&t(m, j) * &d(i, k, m));
                    acc = &acc - &(&t(m, k) * &d(i, j, m));
                    acc = &acc - &(&t(i, m) * &d(m, k, j));
                    acc = &acc + &(&t(i, m) * &d(m, j, k));
                }
                jets.push(acc);
            }
        }
    }
    EvalTensor::new(n, Valence { up: 1, down: 2 }, q - 1, jets)
}

/// Haantjes torsion residual of a (1,1) tensor field, evaluated on the
/// coordinate basis:
///
/// ```text
/// H^i_{jk} = N^i_{ab} v^a_j v^b_k − v^i_m N^m_{jb} v^b_k
///          − v^i_m N^m_{ak} v^a_j + v^i_m v^m_l N^l_{jk}
/// ```
///
/// The returned residual is `max |H^i_{jk}|`; the scale is the largest
/// absolute triple product entering any component.
pub fn haantjes(v: &EvalTensor) -> ResidualSample {
    let n = v.n();
    let nij = nijenhuis_tensor(v);
    let nv = |i: usize, j: usize, k: usize| nij.v(&[i, j, k]);
    let vv = |i: usize, j: usize| v.v(&[i, j]);
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                let mut scale = 0.0_f64;
                let mut push = |t: f64| {
                    acc += t;
                    scale = scale.max(t.abs());
                };
                for a in 0..n {
                    for b in 0..n {
                        push(nv(i, a, b) * vv(a, j) * vv(b, k));
                        push(-vv(i, a) * nv(a, j, b) * vv(b, k));
                        push(-vv(i, a) * nv(a, b, k) * vv(b, j));
                        push(vv(i, a) * vv(a, b) * nv(b, j, k));
                    }
                }
                worst = worst.merge(ResidualSample::new(acc.abs(), scale));
            }
        }
    }
    worst
}

/// How close the structure constants are to the componentwise diagonal form
/// `∂_i ∘ ∂_j = δ_{ij} f_i ∂_i` in the current chart.
#[derive(Debug, Clone)]
pub struct DiagonalStructure {
    /// Diagonal entries f_i = c^i_{ii}.
    pub f: Vec<f64>,
    /// Largest off-pattern component |c^i_{jk}|, indices not all equal.
    pub off_pattern: ResidualSample,
    /// Index (i, j, k) realizing `off_pattern`.
    pub worst_component: [usize; 3],
    /// Residual of `f_j ∂_j f_k = 0` (j ≠ k); present when jets carry first
    /// derivatives.
    pub dependence: Option<ResidualSample>,
    /// Smallest |f_i| (semisimplicity indicator).
    pub min_abs_f: f64,
}

/// Measure the diagonal normal form of `c` in the current chart.
pub fn diagonal_structure(c: &EvalTensor) -> DiagonalStructure {
    let n = c.n();
    let f: Vec<f64> = (0..n).map(|i| c.v(&[i, i, i])).collect();
    let mut off = ResidualSample::ZERO;
    let mut worst = [0usize; 3];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j && j == k {
                    continue;
                }
                let a = c.v(&[i, j, k]).abs();
                if a > off.residual {
                    worst = [i, j, k];
                }
                off = off.merge(ResidualSample::new(a, c.v(&[i, j, k]).abs().max(1.0)));
            }
        }
    }
    let dependence = if c.order() >= 1 {
        let mut dep = ResidualSample::ZERO;
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let t = f[j] * c.d(j, &[k, k, k]);
                dep = dep.merge(ResidualSample::new(
                    t.abs(),
                    f[j].abs().max(c.d(j, &[k, k, k]).abs()),
                ));
            }
        }
        Some(dep)
    } else {
        None
    };
    let min_abs_f = f.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    DiagonalStructure {
        f,
        off_pattern: off,
        worst_component: worst,
        dependence,
        min_abs_f,
    }
}

/// Solve `c^i_{jk} e^k = δ^i_j` for the unity vector field e by least
/// squares over the n² equations, then verify the residual. Errors when no
/// unity exists (relative residual above 1e−8).
pub fn unity_field(c: &EvalTensor) -> Result<EvalTensor> {
    let n = c.n();
    let q = c.order();
    let mut m: Vec<Vec<Jet>> = Vec::with_capacity(n * n);
    let mut b: Vec<Jet> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            m.push((0..n).map(|k| c.jet(&[i, j, k]).clone()).collect());
            b.push(Jet::constant(n, q, if i == j { 1.0 } else { 0.0 }));
        }
    }
    let e = linalg::jet_least_squares(&m, &b, "unity field")?;
    // Verify the overdetermined system is actually satisfied.
    let mut worst = ResidualSample::ZERO;
    for i in 0..n {
        for j in 0..n {
            let mut acc = if i == j { -1.0 } else { 0.0 };
            let mut scale = 1.0_f64;
            for k in 0..n {
                let t = c.v(&[i, j, k]) * e[k].value();
                acc += t;
                scale = scale.max(t.abs());
            }
            worst = worst.merge(ResidualSample::new(acc.abs(), scale));
        }
    }
    if worst.residual > 1e-8 * worst.scale.max(1.0) {
        return Err(Error::domain(
            "unity_field",
            format!(
                "no unity vector field: best least-squares residual {:.3e}",
                worst.residual
            ),
        ));
    }
    Ok(EvalTensor::new(n, Valence::VECTOR, q, e))
}

/// Eigenvalue diagnostics of a (1,1) tensor's value part.
#[derive(Debug, Clone)]
pub struct EigenInfo {
    /// Eigenvalues as (re, im), sorted by real then imaginary part.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Smallest pairwise distance in the complex plane.
    pub min_gap: f64,
    /// Largest |Im λ|.
    pub max_imag_abs: f64,
}

/// Eigenvalue diagnostics for the value part of a (1,1) tensor.
pub fn eigen_info(v: &EvalTensor) -> EigenInfo {
    let n = v.n();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| v.v(&[i, j]));
    let eigenvalues = linalg::eigenvalues(a);
    let mut min_gap = f64::INFINITY;
    for p in 0..n {
        for q in (p + 1)..n {
            let (ar, ai) = eigenvalues[p];
            let (br, bi) = eigenvalues[q];
            min_gap = min_gap.min(((ar - br).powi(2) + (ai - bi).powi(2)).sqrt());
        }
    }
    let max_imag_abs = eigenvalues
        .iter()
        .fold(0.0_f64, |m, &(_, im)| m.max(im.abs()));
    EigenInfo {
        eigenvalues,
        min_gap,
        max_imag_abs,
    }
}
