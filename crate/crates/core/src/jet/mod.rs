//! Dense truncated multivariate jets (Taylor expansions) over `f64`.
//!
//! A `Jet` represents the Taylor polynomial of a smooth function around an
//! (implicit) base point: coefficient `A` stores `d^A f / A!`. Arithmetic is
//! exact truncated power-series arithmetic, so an arbitrary composition of
//! jet operations yields the exact derivatives of the composed function at
//! the base point, up to rounding — no step-size or cancellation error.
//!
//! Partial derivatives are recovered with [`Jet::deriv`], which multiplies the
//! stored coefficient by the factorial of the multi-index.

mod funcs;
mod shape;

pub use shape::JetShape;

use crate::error::{Error, Result};
use std::sync::Arc;

/// Truncated Taylor expansion in `dim` variables at total degree `order`.
#[derive(Clone)]
pub struct Jet {
    shape: Arc<JetShape>,
    coeffs: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Jet(dim={}, order={}, value={}, coeffs={:?})",
            self.dim(),
            self.order(),
            self.value(),
            self.coeffs
        )
    }
}

impl Jet {
    /// Jet of the constant function `v`.
    pub fn constant(dim: usize, order: usize, v: f64) -> Jet {
        let shape = JetShape::get(dim, order);
        let mut coeffs = vec![0.0; shape.len()];
        coeffs[0] = v;
        Jet { shape, coeffs }
    }

    /// Jet of the coordinate function `x_axis` at a point whose `axis`-th
    /// coordinate equals `value`.
    pub fn variable(dim: usize, order: usize, axis: usize, value: f64) -> Jet {
        assert!(axis < dim, "variable axis {axis} out of range for dim {dim}");
        let shape = JetShape::get(dim, order);
        let mut coeffs = vec![0.0; shape.len()];
        coeffs[0] = value;
        if order >= 1 {
            let mut unit = vec![0u8; dim];
            unit[axis] = 1;
            coeffs[shape.rank(&unit).unwrap()] = 1.0;
        }
        Jet { shape, coeffs }
    }

    /// Jet with explicitly given coefficients in storage order.
    pub fn from_coeffs(dim: usize, order: usize, coeffs: Vec<f64>) -> Jet {
        let shape = JetShape::get(dim, order);
        assert_eq!(
            coeffs.len(),
            shape.len(),
            "coefficient vector length does not match shape"
        );
        Jet { shape, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value of the underlying function at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw Taylor coefficient for a multi-index (`d^A f / A!`).
    pub fn coeff(&self, index: &[u8]) -> f64 {
        match self.shape.rank(index) {
            Some(r) => self.coeffs[r],
            None => panic!(
                "multi-index {:?} outside truncation order {}",
                index,
                self.order()
            ),
        }
    }

    /// Partial derivative `d^A f` for a multi-index (coefficient times `A!`).
    pub fn deriv(&self, index: &[u8]) -> f64 {
        let r = self
            .shape
            .rank(index)
            .unwrap_or_else(|| panic!("multi-index {index:?} outside order {}", self.order()));
        self.coeffs[r] * self.shape.factorial(r)
    }

    /// First partial derivative along `axis`.
    pub fn d1(&self, axis: usize) -> f64 {
        let mut ix = vec![0u8; self.dim()];
        ix[axis] = 1;
        self.deriv(&ix)
    }

    /// Second partial derivative along `axis_a`, `axis_b`.
    pub fn d2(&self, axis_a: usize, axis_b: usize) -> f64 {
        let mut ix = vec![0u8; self.dim()];
        ix[axis_a] += 1;
        ix[axis_b] += 1;
        self.deriv(&ix)
    }

    fn assert_same_shape(&self, rhs: &Jet, op: &str) {
        assert!(
            Arc::ptr_eq(&self.shape, &rhs.shape),
            "jet {op}: operands have different shapes ({}x{} vs {}x{})",
            self.dim(),
            self.order(),
            rhs.dim(),
            rhs.order()
        );
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        self.assert_same_shape(rhs, "add");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Jet {
            shape: self.shape.clone(),
            coeffs,
        }
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        self.assert_same_shape(rhs, "sub");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Jet {
            shape: self.shape.clone(),
            coeffs,
        }
    }

    pub fn neg(&self) -> Jet {
        Jet {
            shape: self.shape.clone(),
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            shape: self.shape.clone(),
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }

    /// Truncated product.
    pub fn mul(&self, rhs: &Jet) -> Jet {
        self.assert_same_shape(rhs, "mul");
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(ra, rb, out) in self.shape.products() {
            coeffs[out as usize] += self.coeffs[ra as usize] * rhs.coeffs[rb as usize];
        }
        Jet {
            shape: self.shape.clone(),
            coeffs,
        }
    }

    /// Multiplicative inverse. Errors when the value part vanishes, because
    /// the quotient has no Taylor expansion there.
    pub fn recip(&self) -> Result<Jet> {
        let v = self.value();
        if v == 0.0 {
            return Err(Error::domain("recip", "jet has zero value part"));
        }
        // 1/(v + s) = sum_k (-1)^k s^k / v^(k+1) for the nilpotent part s.
        let mut univ = Vec::with_capacity(self.order() + 1);
        let mut c = 1.0 / v;
        for _ in 0..=self.order() {
            univ.push(c);
            c = -c / v;
        }
        Ok(self.apply_univariate(&univ))
    }

    /// Truncated quotient; errors when `rhs` has zero value part.
    pub fn try_div(&self, rhs: &Jet) -> Result<Jet> {
        Ok(self.mul(&rhs.recip()?))
    }

    /// The jet with its constant coefficient removed (nilpotent part).
    pub fn nilpotent(&self) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] = 0.0;
        out
    }

    /// Compose a univariate Taylor expansion `g` (coefficients `g[k] =
    /// g^(k)(value)/k!`) with this jet: returns the jet of `g(f)`.
    /// The caller supplies coefficients centered at `self.value()`.
    pub fn apply_univariate(&self, g: &[f64]) -> Jet {
        assert!(g.len() == self.order() + 1, "need order+1 coefficients");
        let s = self.nilpotent();
        let mut acc = Jet::constant(self.dim(), self.order(), g[self.order()]);
        for k in (0..self.order()).rev() {
            acc = acc.mul(&s);
            acc.coeffs[0] += g[k];
        }
        acc
    }

    /// Formal partial derivative along `axis`; the result has order one less.
    pub fn derivative(&self, axis: usize) -> Jet {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        assert!(axis < self.dim());
        let out_shape = JetShape::get(self.dim(), self.order() - 1);
        let mut coeffs = vec![0.0; out_shape.len()];
        for (r, ix) in out_shape.indices().iter().enumerate() {
            let mut src = ix.clone();
            src[axis] += 1;
            let src_rank = self.shape.rank(&src).expect("degree within source order");
            coeffs[r] = self.coeffs[src_rank] * (ix[axis] as f64 + 1.0);
        }
        Jet {
            shape: out_shape,
            coeffs,
        }
    }

    /// Copy truncated to a lower (or equal) order.
    pub fn truncate(&self, new_order: usize) -> Jet {
        assert!(new_order <= self.order());
        let out_shape = JetShape::get(self.dim(), new_order);
        let coeffs = self.coeffs[..out_shape.len()].to_vec();
        Jet {
            shape: out_shape,
            coeffs,
        }
    }

    /// Substitute jets for the variables of `self`.
    ///
    /// `self` is read as a polynomial in displacements `D_1..D_dim`; each
    /// `shifts[i]` must have zero value part (a displacement expansion in the
    /// target variables) and all shifts must share one shape with order equal
    /// to `self.order()`. Returns the truncated composition.
    pub fn compose(&self, shifts: &[Jet]) -> Result<Jet> {
        if shifts.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "compose: expected {} shift jets, got {}",
                self.dim(),
                shifts.len()
            )));
        }
        for s in shifts {
            if s.value() != 0.0 {
                return Err(Error::InvalidArgument(
                    "compose: shift jets must have zero value part".into(),
                ));
            }
        }
        let target = shifts[0].shape.clone();
        for s in shifts {
            if !Arc::ptr_eq(&s.shape, &target) {
                return Err(Error::InvalidArgument(
                    "compose: shift jets must share one shape".into(),
                ));
            }
        }
        if target.order() != self.order() {
            return Err(Error::InvalidArgument(format!(
                "compose: shift order {} must equal source order {}",
                target.order(),
                self.order()
            )));
        }
        // Lazily build powers of each shift up to the exponents that occur.
        let mut powers: Vec<Vec<Jet>> = shifts
            .iter()
            .map(|s| vec![Jet::constant(target.dim(), target.order(), 1.0), s.clone()])
            .collect();
        let mut acc = Jet::constant(target.dim(), target.order(), 0.0);
        for (r, ix) in self.shape.indices().iter().enumerate() {
            let c = self.coeffs[r];
            if c == 0.0 {
                continue;
            }
            let mut term = Jet::constant(target.dim(), target.order(), c);
            for (i, &e) in ix.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap().mul(&shifts[i]);
                    powers[i].push(next);
                }
                term = term.mul(&powers[i][e as usize]);
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// Evaluate the stored polynomial at a displacement vector (plain `f64`).
    pub fn eval_poly(&self, displacement: &[f64]) -> f64 {
        assert_eq!(displacement.len(), self.dim());
        let mut total = 0.0;
        for (r, ix) in self.shape.indices().iter().enumerate() {
            let c = self.coeffs[r];
            if c == 0.0 {
                continue;
            }
            let mut m = c;
            for (i, &e) in ix.iter().enumerate() {
                for _ in 0..e {
                    m *= displacement[i];
                }
            }
            total += m;
        }
        total
    }

    /// Max absolute coefficient (used for tail estimates of series).
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Max absolute coefficient among terms of exactly the given degree.
    pub fn max_abs_coeff_at_degree(&self, degree: usize) -> f64 {
        let mut m = 0.0f64;
        for (r, ix) in self.shape.indices().iter().enumerate() {
            let d: usize = ix.iter().map(|&e| e as usize).sum();
            if d == degree {
                m = m.max(self.coeffs[r].abs());
            }
        }
        m
    }
}

impl std::ops::Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet::add(self, rhs)
    }
}

impl std::ops::Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet::sub(self, rhs)
    }
}

impl std::ops::Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul(self, rhs)
    }
}

impl std::ops::Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::neg(self)
    }
}
