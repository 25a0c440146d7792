//! `fman-report/1`: machine-readable check reports.
//!
//! The JSON rendering is the contract: field order is fixed by struct
//! declaration order, collections are sorted before serialization, and all
//! inputs are drawn from a named, seeded PRNG — so identical (spec, suite,
//! seed, flags) produce byte-identical reports.

use serde::Serialize;

use crate::error::Error;
use crate::residual::{ResidualSample, Tolerance};

/// Format tag of every report document.
pub const REPORT_FORMAT: &str = "fman-report/1";

/// JSON Schema the machine report validates against (shipped with the crate).
pub const REPORT_SCHEMA: &str = include_str!("../schema/fman-report-1.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Jet truncation orders used by a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Orders {
    /// Order of pointwise tensor evaluations (identities in values and
    /// derivatives).
    pub pointwise: usize,
    /// Order of series constructions (hierarchies, diagonal solutions).
    pub series: usize,
}

/// A suite that `--suite all` did not run, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct SkippedSuite {
    pub suite: String,
    pub reason: String,
}

/// Outcome of one named check over the sample set.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Points the check was evaluated at (1 for base-point-only checks).
    pub points: usize,
    pub residual_max: f64,
    pub residual_median: f64,
    pub scale: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub verdict: Verdict,
    /// Worst failing sample point, when the verdict is `fail`.
    pub witness: Option<Vec<f64>>,
    /// Number of points where evaluation errored (these fail the check when
    /// they exceed 10% of the points).
    pub errors: usize,
    pub first_error: Option<String>,
}

/// The machine-readable result of `run_suite`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub format: &'static str,
    pub spec: String,
    pub suite: String,
    pub rng: &'static str,
    pub seed: u64,
    pub samples: usize,
    pub orders: Orders,
    pub checks: Vec<CheckResult>,
    pub skipped: Vec<SkippedSuite>,
    pub warnings: Vec<String>,
    pub verdict: Verdict,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Canonical JSON rendering (the byte-stable contract).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Human-readable text summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "suite `{}` on `{}`: seed {}, {} samples, orders (pointwise {}, series {})\n",
            self.suite, self.spec, self.seed, self.samples, self.orders.pointwise, self.orders.series
        ));
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {:<34} max {:>12.3e}  median {:>12.3e}  scale {:>12.3e}  tol {:.1e}+{:.1e}*scale",
                match c.verdict {
                    Verdict::Pass => "pass",
                    Verdict::Fail => "FAIL",
                },
                c.name,
                c.residual_max,
                c.residual_median,
                c.scale,
                c.tol_abs,
                c.tol_rel,
            ));
            if c.errors > 0 {
                out.push_str(&format!("  ({} point errors)", c.errors));
            }
            out.push('\n');
            if let Some(w) = &c.witness {
                out.push_str(&format!("         witness point: {w:?}\n"));
            }
            if let Some(e) = &c.first_error {
                out.push_str(&format!("         first error: {e}\n"));
            }
        }
        for s in &self.skipped {
            out.push_str(&format!("  [skip] suite `{}`: {}\n", s.suite, s.reason));
        }
        for w in &self.warnings {
            out.push_str(&format!("  [warn] {w}\n"));
        }
        out.push_str(&format!(
            "overall: {}\n",
            match self.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
            }
        ));
        out
    }
}

/// Builds one `CheckResult` from per-point residual samples and errors.
#[derive(Debug)]
pub struct CheckAccumulator {
    name: String,
    tol: Tolerance,
    residuals: Vec<f64>,
    scale: f64,
    worst_fail: Option<(f64, Vec<f64>)>,
    worst: f64,
    errors: usize,
    first_error: Option<String>,
}

impl CheckAccumulator {
    pub fn new(name: impl Into<String>, tol: Tolerance) -> CheckAccumulator {
        CheckAccumulator {
            name: name.into(),
            tol,
            residuals: Vec::new(),
            scale: 0.0,
            worst_fail: None,
            worst: 0.0,
            errors: 0,
            first_error: None,
        }
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    /// Record the residual sample measured at `point`.
    pub fn add(&mut self, point: &[f64], sample: ResidualSample) {
        self.residuals.push(sample.residual);
        self.scale = self.scale.max(sample.scale);
        self.worst = self.worst.max(sample.residual);
        if !self.tol.passes(&sample) {
            let better = match &self.worst_fail {
                Some((r, _)) => sample.residual > *r,
                None => true,
            };
            if better {
                self.worst_fail = Some((sample.residual, point.to_vec()));
            }
        }
    }

    /// Record an evaluation error at `point`.
    pub fn add_error(&mut self, point: &[f64], err: &Error) {
        self.errors += 1;
        if self.first_error.is_none() {
            self.first_error = Some(format!("at {point:?}: {err}"));
        }
    }

    /// Close the accumulator. `total_points` is the number of points the
    /// check was driven over (evaluations plus errors); error counts above
    /// 10% of it fail the check.
    pub fn finish(mut self, total_points: usize) -> CheckResult {
        self.residuals.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
        let median = if self.residuals.is_empty() {
            0.0
        } else {
            let m = self.residuals.len();
            if m % 2 == 1 {
                self.residuals[m / 2]
            } else {
                0.5 * (self.residuals[m / 2 - 1] + self.residuals[m / 2])
            }
        };
        let error_fail = total_points > 0 && 10 * self.errors > total_points;
        let verdict = if self.worst_fail.is_some() || error_fail || self.residuals.is_empty() {
            Verdict::Fail
        } else {
            Verdict::Pass
        };
        CheckResult {
            name: self.name,
            points: total_points,
            residual_max: self.worst,
            residual_median: median,
            scale: self.scale,
            tol_abs: self.tol.abs,
            tol_rel: self.tol.rel,
            verdict,
            witness: self.worst_fail.map(|(_, p)| p),
            errors: self.errors,
            first_error: self.first_error,
        }
    }
}
