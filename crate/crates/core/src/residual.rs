//! Residuals and tolerances.
//!
//! Every identity check reduces to a residual paired with a scale — the
//! largest absolute summand that entered the identity. A residual passes iff
//! `|residual| ≤ tol_abs + tol_rel · scale`.

/// Default absolute tolerance.
pub const DEFAULT_TOL_ABS: f64 = 1e-9;
/// Default relative tolerance (multiplies the summand scale).
pub const DEFAULT_TOL_REL: f64 = 1e-9;

/// A residual together with the scale of the summands that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub residual: f64,
    pub scale: f64,
}

impl ResidualSample {
    pub const ZERO: ResidualSample = ResidualSample {
        residual: 0.0,
        scale: 0.0,
    };

    pub fn new(residual: f64, scale: f64) -> ResidualSample {
        ResidualSample { residual, scale }
    }

    /// Keep the sample with the larger residual; scales are merged so the
    /// pass/fail threshold never shrinks when samples are combined.
    pub fn merge(self, other: ResidualSample) -> ResidualSample {
        ResidualSample {
            residual: self.residual.max(other.residual),
            scale: self.scale.max(other.scale),
        }
    }
}

/// Absolute + relative tolerance pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Tolerance {
        Tolerance {
            abs: DEFAULT_TOL_ABS,
            rel: DEFAULT_TOL_REL,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Tolerance {
        Tolerance { abs, rel }
    }

    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale
    }

    pub fn passes(&self, sample: &ResidualSample) -> bool {
        sample.residual.abs() <= self.threshold(sample.scale)
    }
}
