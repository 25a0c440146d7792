//! Tensors given by truncated power series around a base point.
//!
//! Constructed objects (hierarchy vector fields, series solutions of linear
//! systems) are polynomials in the displacement from a base point. This module
//! re-expands such polynomials as jets at nearby points, so downstream checks
//! can treat them exactly like expression-backed tensors.

use crate::chart::Chart;
use crate::error::Result;
use crate::jet::Jet;
use crate::tensor::{EvalTensor, TensorSource, Valence};

/// Re-expand a polynomial jet (coefficients around an implicit base point) as
/// a jet of the requested order at displacement `disp` from that base point.
///
/// Coefficient `B` of the result is `(d^B P)(disp) / B!`, computed with formal
/// derivatives of the stored polynomial — no truncation beyond the
/// polynomial's own degree is introduced.
pub fn poly_as_jet_at(poly: &Jet, disp: &[f64], order: usize) -> Jet {
    let n = poly.dim();
    assert_eq!(disp.len(), n);
    let out_shape = crate::jet::JetShape::get(n, order);
    // derivs[r] = formal derivative of `poly` by the r-th output multi-index.
    let mut derivs: Vec<Jet> = Vec::with_capacity(out_shape.len());
    let mut coeffs = Vec::with_capacity(out_shape.len());
    for (r, ix) in out_shape.indices().iter().enumerate() {
        let d = if r == 0 {
            poly.clone()
        } else {
            let axis = ix.iter().position(|&e| e > 0).unwrap();
            let mut parent_ix = ix.clone();
            parent_ix[axis] -= 1;
            let parent_rank = out_shape.rank(&parent_ix).unwrap();
            let parent = &derivs[parent_rank];
            if parent.order() == 0 {
                Jet::constant(n, 0, 0.0)
            } else {
                parent.derivative(axis)
            }
        };
        coeffs.push(d.eval_poly(disp) / out_shape.factorial(r));
        derivs.push(d);
    }
    Jet::from_coeffs(n, order, coeffs)
}

/// Invert a displacement map given as jets: `shifts[a]` is the `a`-th target
/// displacement as a series in source displacements (zero value part,
/// invertible linear part). Returns the source displacements as series in the
/// target displacements, truncated at the shared order.
///
/// Uses the fixed-point form of series inversion: with `D(t) = J t + N(t)`
/// (`N` of degree ≥ 2), iterate `E ← J⁻¹ (s − N(E))`, which gains one correct
/// degree per pass.
pub fn invert_series_map(shifts: &[Jet], context: &str) -> Result<Vec<Jet>> {
    let n = shifts.len();
    assert!(n > 0);
    let order = shifts[0].order();
    for s in shifts {
        assert_eq!(s.dim(), n, "displacement map must be square");
        assert_eq!(s.order(), order);
        assert_eq!(s.value(), 0.0, "displacement map must have zero value part");
    }
    let jac = nalgebra::DMatrix::from_fn(n, n, |a, i| shifts[a].d1(i));
    let jac_inv = crate::linalg::invert_f64(jac, context)?;
    // N_a = shifts[a] minus its linear part.
    let nonlinear: Vec<Jet> = (0..n)
        .map(|a| {
            let mut lin = Jet::constant(n, order, 0.0);
            for i in 0..n {
                lin = lin.add(&Jet::variable(n, order, i, 0.0).scale(shifts[a].d1(i)));
            }
            shifts[a].sub(&lin)
        })
        .collect();
    let identity: Vec<Jet> = (0..n).map(|i| Jet::variable(n, order, i, 0.0)).collect();
    let mut inv: Vec<Jet> = (0..n)
        .map(|i| {
            let mut e = Jet::constant(n, order, 0.0);
            for a in 0..n {
                e = e.add(&identity[a].scale(jac_inv[(i, a)]));
            }
            e
        })
        .collect();
    for _ in 1..order.max(1) {
        let corrected: Result<Vec<Jet>> = (0..n)
            .map(|a| Ok(identity[a].sub(&nonlinear[a].compose(&inv)?)))
            .collect();
        let corrected = corrected?;
        inv = (0..n)
            .map(|i| {
                let mut e = Jet::constant(n, order, 0.0);
                for a in 0..n {
                    e = e.add(&corrected[a].scale(jac_inv[(i, a)]));
                }
                e
            })
            .collect();
    }
    // Closure check: the round trip must reproduce the identity map.
    let scale = shifts.iter().fold(1.0f64, |m, s| m.max(s.max_abs_coeff()));
    for a in 0..n {
        let round = shifts[a].compose(&inv)?;
        let resid = round.sub(&identity[a]).max_abs_coeff();
        if resid > 1e-8 * scale {
            return Err(crate::error::Error::SeriesInconsistent {
                degree: order,
                mismatch: resid,
            });
        }
    }
    Ok(inv)
}

/// A tensor whose components are truncated power series around `base`.
#[derive(Debug, Clone)]
pub struct SeriesTensor {
    chart: Chart,
    valence: Valence,
    base: Vec<f64>,
    comps: Vec<Jet>,
}

impl SeriesTensor {
    /// `comps` are polynomial jets (all of one shape, `dim == chart.dim()`)
    /// in row-major `[upper..., lower...]` component order.
    pub fn new(chart: Chart, valence: Valence, base: Vec<f64>, comps: Vec<Jet>) -> SeriesTensor {
        let n = chart.dim();
        assert_eq!(base.len(), n);
        assert_eq!(comps.len(), n.pow(valence.rank() as u32));
        for c in &comps {
            assert_eq!(c.dim(), n, "series component dimension mismatch");
        }
        SeriesTensor {
            chart,
            valence,
            base,
            comps,
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn series_order(&self) -> usize {
        self.comps[0].order()
    }

    pub fn component(&self, idx: &[usize]) -> &Jet {
        &self.comps[crate::tensor::flat_index(self.chart.dim(), idx)]
    }

    pub fn components(&self) -> &[Jet] {
        &self.comps
    }

    /// Largest absolute series coefficient among terms of exactly `degree`,
    /// over all components (used for convergence-radius estimates).
    pub fn max_coeff_at_degree(&self, degree: usize) -> f64 {
        self.comps
            .iter()
            .fold(0.0f64, |m, c| m.max(c.max_abs_coeff_at_degree(degree)))
    }

    fn displacement(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.base).map(|(a, b)| a - b).collect()
    }
}

impl TensorSource for SeriesTensor {
    fn n(&self) -> usize {
        self.chart.dim()
    }

    fn valence(&self) -> Valence {
        self.valence
    }

    fn eval(&self, x: &[f64], order: usize) -> Result<EvalTensor> {
        let disp = self.displacement(x);
        let jets = self
            .comps
            .iter()
            .map(|c| poly_as_jet_at(c, &disp, order))
            .collect();
        Ok(EvalTensor::new(self.n(), self.valence, order, jets))
    }
}
