//! Coordinate changes: push tensors evaluated in a source chart into a target
//! chart, with full jets on the target side.
//!
//! The map is given by expressions for the target coordinates in terms of the
//! source coordinates. At a source point we build the forward displacement
//! series, invert it ([`crate::series::invert_series_map`]), contract the
//! tensor with Jacobian jets in the source chart, and re-express the result
//! as jets in the target coordinates by composition.

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::{ExprContext, FieldExpr, JetEnv};
use crate::jet::Jet;
use crate::linalg::jet_inverse;
use crate::series::invert_series_map;
use crate::tensor::EvalTensor;
use std::collections::HashMap;

/// A smooth change of coordinates between two charts of equal dimension.
#[derive(Debug, Clone)]
pub struct ChartMap {
    source: Chart,
    target: Chart,
    exprs: Vec<FieldExpr>,
}

impl ChartMap {
    pub fn new(source: Chart, target: Chart, exprs: Vec<FieldExpr>) -> Result<ChartMap> {
        if source.dim() != target.dim() || exprs.len() != source.dim() {
            return Err(Error::InvalidArgument(format!(
                "chart map needs {} expressions between charts of equal dimension",
                source.dim()
            )));
        }
        Ok(ChartMap {
            source,
            target,
            exprs,
        })
    }

    /// Parse the target-coordinate expressions in the source chart's context.
    pub fn parse(source: Chart, target: Chart, exprs: &[String]) -> Result<ChartMap> {
        let ctx = ExprContext::chart(source.names());
        let parsed: Result<Vec<FieldExpr>> =
            exprs.iter().map(|s| FieldExpr::parse(s, &ctx)).collect();
        ChartMap::new(source, target, parsed?)
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    pub fn exprs(&self) -> &[FieldExpr] {
        &self.exprs
    }

    /// Image of a source point.
    pub fn target_point(&self, u: &[f64], params: &HashMap<String, f64>) -> Result<Vec<f64>> {
        self.exprs
            .iter()
            .map(|e| e.eval_f64(u, None, params))
            .collect()
    }

    /// Expand the map at a source point to the given jet order.
    pub fn at(&self, u0: &[f64], order: usize, params: &HashMap<String, f64>) -> Result<ChartMapAt> {
        let n = self.source.dim();
        let env = JetEnv::chart(u0, order + 1).with_params(params);
        let fwd: Result<Vec<Jet>> = self.exprs.iter().map(|e| e.eval_jet(&env)).collect();
        let fwd = fwd?;
        let target_point: Vec<f64> = fwd.iter().map(|j| j.value()).collect();
        let jac: Vec<Vec<Jet>> = (0..n)
            .map(|a| (0..n).map(|i| fwd[a].derivative(i)).collect())
            .collect();
        let inv_jac = jet_inverse(&jac, "chart map Jacobian")?;
        let fwd_shift: Vec<Jet> = fwd.iter().map(|j| j.truncate(order).nilpotent()).collect();
        let inv_shift = invert_series_map(&fwd_shift, "chart map inversion")?;
        Ok(ChartMapAt {
            n,
            order,
            target_point,
            jac,
            inv_jac,
            inv_shift,
        })
    }
}

/// A chart map expanded at one source point.
#[derive(Debug, Clone)]
pub struct ChartMapAt {
    n: usize,
    order: usize,
    target_point: Vec<f64>,
    jac: Vec<Vec<Jet>>,
    inv_jac: Vec<Vec<Jet>>,
    inv_shift: Vec<Jet>,
}

impl ChartMapAt {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn target_point(&self) -> &[f64] {
        &self.target_point
    }

    /// Jacobian values `J^a_i = ∂ r^a / ∂ u^i`.
    pub fn jacobian_values(&self) -> Vec<Vec<f64>> {
        self.jac
            .iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect()
    }

    /// Re-express a source-chart jet (at the expansion point, same order) as
    /// a jet in the target coordinates at the image point.
    pub fn to_target(&self, f_in_source: &Jet) -> Result<Jet> {
        assert_eq!(f_in_source.order(), self.order, "jet order mismatch");
        f_in_source.compose(&self.inv_shift)
    }

    /// Push an evaluated tensor (valence scalar, (1,0), (1,1), (0,2) or
    /// (1,2)) to the target chart. The result carries jets in the target
    /// coordinates at the image point.
    pub fn push(&self, t: &EvalTensor) -> Result<EvalTensor> {
        let n = self.n;
        assert_eq!(t.n(), n);
        assert!(t.order() >= self.order, "tensor jets have insufficient order");
        let q = self.order;
        let tj = |idx: &[usize]| t.jet(idx).truncate(q);
        let jac = |a: usize, i: usize| self.jac[a][i].truncate(q);
        let inv = |i: usize, a: usize| self.inv_jac[i][a].truncate(q);
        let valence = t.valence();
        let mut jets = Vec::new();
        match (valence.up, valence.down) {
            (0, 0) => jets.push(self.to_target(&tj(&[]))?),
            (1, 0) => {
                for a in 0..n {
                    let mut acc = Jet::constant(n, q, 0.0);
                    for i in 0..n {
                        acc = acc.add(&jac(a, i).mul(&tj(&[i])));
                    }
                    jets.push(self.to_target(&acc)?);
                }
            }
            (1, 1) => {
                for a in 0..n {
                    for b in 0..n {
                        let mut acc = Jet::constant(n, q, 0.0);
                        for i in 0..n {
                            for j in 0..n {
                                acc = acc.add(&jac(a, i).mul(&tj(&[i, j])).mul(&inv(j, b)));
                            }
                        }
                        jets.push(self.to_target(&acc)?);
                    }
                }
            }
            (0, 2) => {
                for a in 0..n {
                    for b in 0..n {
                        let mut acc = Jet::constant(n, q, 0.0);
                        for i in 0..n {
                            for j in 0..n {
                                acc = acc.add(&inv(i, a).mul(&inv(j, b)).mul(&tj(&[i, j])));
                            }
                        }
                        jets.push(self.to_target(&acc)?);
                    }
                }
            }
            (1, 2) => {
                for a in 0..n {
                    for b in 0..n {
                        for cidx in 0..n {
                            let mut acc = Jet::constant(n, q, 0.0);
                            for i in 0..n {
                                for j in 0..n {
                                    for k in 0..n {
                                        acc = acc.add(
                                            &jac(a, i)
                                                .mul(&inv(j, b))
                                                .mul(&inv(k, cidx))
                                                .mul(&tj(&[i, j, k])),
                                        );
                                    }
                                }
                            }
                            jets.push(self.to_target(&acc)?);
                        }
                    }
                }
            }
            (up, down) => {
                return Err(Error::InvalidArgument(format!(
                    "chart map push not implemented for valence ({up},{down})"
                )))
            }
        }
        Ok(EvalTensor::new(n, valence, q, jets))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ChartTensor, TensorEntry, Valence};

    fn charts() -> (Chart, Chart) {
        (
            Chart::new(vec!["r1".into(), "r2".into()]).unwrap(),
            Chart::new(vec!["x".into(), "y".into()]).unwrap(),
        )
    }

    fn polar_to_cartesian() -> ChartMap {
        let (src, dst) = charts();
        ChartMap::parse(src, dst, &["r1*cos(r2)".into(), "r1*sin(r2)".into()]).unwrap()
    }

    #[test]
    fn polar_metric_pushes_to_the_identity() {
        let map = polar_to_cartesian();
        let ctx = ExprContext::chart(map.source().names());
        let entries = vec![
            TensorEntry {
                idx: vec![0, 0],
                expr: FieldExpr::parse("1", &ctx).unwrap(),
            },
            TensorEntry {
                idx: vec![1, 1],
                expr: FieldExpr::parse("r1^2", &ctx).unwrap(),
            },
        ];
        let (g, _) = ChartTensor::from_entries(
            map.source().clone(),
            Valence::METRIC,
            &entries,
            true,
        )
        .unwrap();
        let u0 = [1.4, 0.7];
        let at = map.at(&u0, 2, &HashMap::new()).unwrap();
        let ge = g.eval(&u0, 2, &HashMap::new()).unwrap();
        let pushed = at.push(&ge).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((pushed.v(&[a, b]) - expect).abs() < 1e-11);
                // The euclidean metric is constant, so every derivative
                // coefficient in the target chart must vanish.
                assert!(pushed.jet(&[a, b]).nilpotent().max_abs_coeff() < 1e-10);
            }
        }
    }

    #[test]
    fn radial_vector_pushes_to_the_unit_radial_direction() {
        let map = polar_to_cartesian();
        let ctx = ExprContext::chart(map.source().names());
        let (x, _) = ChartTensor::from_entries(
            map.source().clone(),
            Valence::VECTOR,
            &[TensorEntry {
                idx: vec![0],
                expr: FieldExpr::parse("1", &ctx).unwrap(),
            }],
            false,
        )
        .unwrap();
        let u0 = [2.0, 0.3];
        let at = map.at(&u0, 1, &HashMap::new()).unwrap();
        let xe = x.eval(&u0, 1, &HashMap::new()).unwrap();
        let pushed = at.push(&xe).unwrap();
        assert!((pushed.v(&[0]) - 0.3f64.cos()).abs() < 1e-12);
        assert!((pushed.v(&[1]) - 0.3f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn componentwise_product_transforms_by_the_linear_map() {
        // Under r = (2u1, u1 + u2), the componentwise product transforms to
        // values computed by hand from A c (A^-1, A^-1).
        let src = Chart::new(vec!["u1".into(), "u2".into()]).unwrap();
        let dst = Chart::new(vec!["r1".into(), "r2".into()]).unwrap();
        let map = ChartMap::parse(src.clone(), dst, &["2*u1".into(), "u1 + u2".into()]).unwrap();
        let ctx = ExprContext::chart(src.names());
        let entries: Vec<TensorEntry> = (0..2)
            .map(|i| TensorEntry {
                idx: vec![i, i, i],
                expr: FieldExpr::parse("1", &ctx).unwrap(),
            })
            .collect();
        let (c, _) = ChartTensor::from_entries(src, Valence::PRODUCT, &entries, true).unwrap();
        let u0 = [0.4, -0.2];
        let at = map.at(&u0, 1, &HashMap::new()).unwrap();
        let ce = c.eval(&u0, 1, &HashMap::new()).unwrap();
        let pushed = at.push(&ce).unwrap();
        let expect = [
            // (a, b, c, value) for A = [[2,0],[1,1]], A^-1 = [[1/2,0],[-1/2,1]]
            (0, 0, 0, 0.5),
            (0, 0, 1, 0.0),
            (0, 1, 1, 0.0),
            (1, 0, 0, 0.5),
            (1, 0, 1, -0.5),
            (1, 1, 1, 1.0),
        ];
        for (a, b, cc, v) in expect {
            assert!(
                (pushed.v(&[a, b, cc]) - v).abs() < 1e-12,
                "component ({a},{b},{cc})"
            );
        }
    }
}
