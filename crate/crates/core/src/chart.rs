//! Charts, coordinate boxes and deterministic point sampling.
//!
//! All geometry in this crate is pointwise on a single chart: a list of
//! coordinate names together with a closed box in which sample points are
//! drawn. Sampling is reproducible: given the same box, seed and count, the
//! same points come out on every platform (ChaCha8 keystream, one `f64` per
//! coordinate in declaration order).

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Name of the PRNG recorded in reports, for reproducibility.
pub const RNG_NAME: &str = "chacha8";

/// An ordered list of coordinate names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chart {
    names: Vec<String>,
}

impl Chart {
    pub fn new(names: Vec<String>) -> Result<Chart> {
        if names.is_empty() {
            return Err(Error::spec("chart needs at least one coordinate"));
        }
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::spec(format!("duplicate coordinate name `{a}`")));
            }
        }
        Ok(Chart { names })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }
}

/// Axis-aligned closed box of chart points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    ranges: Vec<(f64, f64)>,
}

impl SampleBox {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<SampleBox> {
        for &(lo, hi) in &ranges {
            if lo >= hi || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::spec(format!(
                    "box range [{lo}, {hi}] must be finite with lo < hi"
                )));
            }
        }
        Ok(SampleBox { ranges })
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn center(&self) -> Vec<f64> {
        self.ranges.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.ranges)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    /// Sub-box of half-width `radius` (in the max norm) around `center`,
    /// clipped to this box.
    pub fn clipped_around(&self, center: &[f64], radius: f64) -> Result<SampleBox> {
        let ranges = center
            .iter()
            .zip(&self.ranges)
            .map(|(&c, &(lo, hi))| ((c - radius).max(lo), (c + radius).min(hi)))
            .collect();
        SampleBox::new(ranges)
    }

    /// Draw `count` uniform points, one `f64` per coordinate in declaration
    /// order, from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.ranges
                    .iter()
                    .map(|&(lo, hi)| lo + rng.gen::<f64>() * (hi - lo))
                    .collect()
            })
            .collect()
    }
}

/// Uniform draws in `[-1, 1]`, used for random test vectors and coefficients.
pub fn unit_draws(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect()
}
