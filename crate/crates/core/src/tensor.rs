//! Chart tensors and their pointwise jet evaluations.
//!
//! A [`ChartTensor`] stores one scalar expression per component for a fixed
//! valence; evaluating it at a point produces an [`EvalTensor`], a flat array
//! of jets from which checks read values and partial derivatives. The same
//! `EvalTensor` shape is produced by series-backed and reduction-backed
//! sources, so every residual formula downstream is written once against it.

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::{FieldExpr, JetEnv};
use crate::jet::Jet;
use std::collections::HashMap;

/// Tensor valence: `up` contravariant slots followed by `down` covariant ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Valence {
    pub up: usize,
    pub down: usize,
}

impl Valence {
    pub const SCALAR: Valence = Valence { up: 0, down: 0 };
    pub const VECTOR: Valence = Valence { up: 1, down: 0 };
    pub const ENDOMORPHISM: Valence = Valence { up: 1, down: 1 };
    pub const METRIC: Valence = Valence { up: 0, down: 2 };
    pub const PRODUCT: Valence = Valence { up: 1, down: 2 }; // c^i_{jk}, connections

    pub fn rank(self) -> usize {
        self.up + self.down
    }
}

/// Row-major position of a component index tuple (each entry `< n`).
pub fn flat_index(n: usize, idx: &[usize]) -> usize {
    let mut pos = 0;
    for &i in idx {
        debug_assert!(i < n);
        pos = pos * n + i;
    }
    pos
}

/// One sparse component of a tensor given by expressions, 0-based indices in
/// `[upper..., lower...]` order.
#[derive(Debug, Clone)]
pub struct TensorEntry {
    pub idx: Vec<usize>,
    pub expr: FieldExpr,
}

/// A tensor field on a chart, one expression per component.
#[derive(Debug, Clone)]
pub struct ChartTensor {
    chart: Chart,
    valence: Valence,
    comps: Vec<FieldExpr>,
}

impl ChartTensor {
    pub fn zeros(chart: Chart, valence: Valence) -> ChartTensor {
        let n = chart.dim();
        let comps = vec![FieldExpr::constant(0.0); n.pow(valence.rank() as u32)];
        ChartTensor {
            chart,
            valence,
            comps,
        }
    }

    /// Build from sparse entries. When `symmetrize_last_two` is set (used for
    /// commutative products), each entry is mirrored into the component with
    /// the last two indices swapped; conflicting mirrored entries are
    /// reported in the returned warnings rather than silently overwritten.
    pub fn from_entries(
        chart: Chart,
        valence: Valence,
        entries: &[TensorEntry],
        symmetrize_last_two: bool,
    ) -> Result<(ChartTensor, Vec<String>)> {
        let n = chart.dim();
        let rank = valence.rank();
        let mut comps = vec![FieldExpr::constant(0.0); n.pow(rank as u32)];
        let mut set = vec![false; comps.len()];
        let mut warnings = Vec::new();
        // Returns whether the placement conflicted with an earlier entry.
        let place = |idx: &[usize],
                         expr: &FieldExpr,
                         comps: &mut Vec<FieldExpr>,
                         set: &mut Vec<bool>,
                         warnings: &mut Vec<String>|
         -> Result<bool> {
            for &i in idx {
                if i >= n {
                    return Err(Error::spec(format!(
                        "tensor index {} out of range 1..{} in entry {:?}",
                        i + 1,
                        n,
                        idx.iter().map(|v| v + 1).collect::<Vec<_>>()
                    )));
                }
            }
            let pos = flat_index(n, idx);
            if set[pos] {
                if comps[pos].text() != expr.text() {
                    warnings.push(format!(
                        "component {:?} specified twice with different expressions (`{}` vs `{}`); keeping the first",
                        idx.iter().map(|v| v + 1).collect::<Vec<_>>(),
                        comps[pos].text(),
                        expr.text()
                    ));
                    return Ok(true);
                }
                return Ok(false);
            }
            comps[pos] = expr.clone();
            set[pos] = true;
            Ok(false)
        };
        for e in entries {
            if e.idx.len() != rank {
                return Err(Error::spec(format!(
                    "entry has {} indices, tensor of valence ({},{}) needs {}",
                    e.idx.len(),
                    valence.up,
                    valence.down,
                    rank
                )));
            }
            let conflicted = place(&e.idx, &e.expr, &mut comps, &mut set, &mut warnings)?;
            if symmetrize_last_two && rank >= 2 && !conflicted {
                let mut mirrored = e.idx.clone();
                mirrored.swap(rank - 1, rank - 2);
                if mirrored != e.idx {
                    place(&mirrored, &e.expr, &mut comps, &mut set, &mut warnings)?;
                }
            }
        }
        Ok((
            ChartTensor {
                chart,
                valence,
                comps,
            },
            warnings,
        ))
    }

    /// Build from a dense closure producing each component.
    pub fn from_fn(
        chart: Chart,
        valence: Valence,
        mut f: impl FnMut(&[usize]) -> FieldExpr,
    ) -> ChartTensor {
        let n = chart.dim();
        let rank = valence.rank();
        let mut comps = Vec::with_capacity(n.pow(rank as u32));
        let mut idx = vec![0usize; rank];
        loop {
            comps.push(f(&idx));
            // odometer increment
            let mut k = rank;
            loop {
                if k == 0 {
                    return ChartTensor {
                        chart,
                        valence,
                        comps,
                    };
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn n(&self) -> usize {
        self.chart.dim()
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn component(&self, idx: &[usize]) -> &FieldExpr {
        &self.comps[flat_index(self.n(), idx)]
    }

    pub fn components(&self) -> &[FieldExpr] {
        &self.comps
    }

    /// Evaluate all components as jets of the given order at `x`.
    pub fn eval(&self, x: &[f64], order: usize, params: &HashMap<String, f64>) -> Result<EvalTensor> {
        let env = JetEnv::chart(x, order).with_params(params);
        let jets: Result<Vec<Jet>> = self.comps.iter().map(|c| c.eval_jet(&env)).collect();
        Ok(EvalTensor {
            n: self.n(),
            valence: self.valence,
            order,
            jets: jets?,
        })
    }
}

/// A tensor evaluated at one point: a flat array of jets.
///
/// `v` reads a component value, `d` a first partial, `dd` a second partial;
/// the derivative axis comes first, then the component indices in
/// `[upper..., lower...]` order.
#[derive(Debug, Clone)]
pub struct EvalTensor {
    n: usize,
    valence: Valence,
    order: usize,
    jets: Vec<Jet>,
}

impl EvalTensor {
    pub fn new(n: usize, valence: Valence, order: usize, jets: Vec<Jet>) -> EvalTensor {
        assert_eq!(jets.len(), n.pow(valence.rank() as u32));
        EvalTensor {
            n,
            valence,
            order,
            jets,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn jet(&self, idx: &[usize]) -> &Jet {
        &self.jets[flat_index(self.n, idx)]
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    /// Component value.
    pub fn v(&self, idx: &[usize]) -> f64 {
        self.jet(idx).value()
    }

    /// First partial derivative along `axis`.
    pub fn d(&self, axis: usize, idx: &[usize]) -> f64 {
        self.jet(idx).d1(axis)
    }

    /// Second partial derivative along `axis_a`, `axis_b`.
    pub fn dd(&self, axis_a: usize, axis_b: usize, idx: &[usize]) -> f64 {
        self.jet(idx).d2(axis_a, axis_b)
    }

    /// Largest absolute component value (used in scale estimates).
    pub fn max_abs_value(&self) -> f64 {
        self.jets.iter().fold(0.0f64, |m, j| m.max(j.value().abs()))
    }
}

/// Anything that can be evaluated to an [`EvalTensor`] at a point: tensors
/// given by expressions, truncated series, or implicit (reduction-backed)
/// constructions.
pub trait TensorSource {
    fn n(&self) -> usize;
    fn valence(&self) -> Valence;
    fn eval(&self, x: &[f64], order: usize) -> Result<EvalTensor>;
}

impl TensorSource for ChartTensor {
    fn n(&self) -> usize {
        ChartTensor::n(self)
    }

    fn valence(&self) -> Valence {
        self.valence
    }

    fn eval(&self, x: &[f64], order: usize) -> Result<EvalTensor> {
        ChartTensor::eval(self, x, order, &HashMap::new())
    }
}
