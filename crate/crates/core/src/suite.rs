//! Named check suites: seeded, deterministic verification runs over a spec.
//!
//! A *suite* is a fixed list of named checks evaluated on a common sample
//! grid drawn from the spec's box.  Every residual is compared against the
//! run tolerance (scaled per check, see [`tolerance_factor`]); the result is
//! a [`CheckReport`] whose JSON rendering is byte-identical across repeated
//! runs with the same seed.
//!
//! Suites and the data they need:
//!
//! | suite        | requires                          |
//! |--------------|-----------------------------------|
//! | `algebra`    | structure constants               |
//! | `flows`      | structure constants               |
//! | `flat`       | structure constants + connection  |
//! | `compat`     | structure constants + connection  |
//! | `riemannian` | structure constants + metric      |
//! | `benney`     | a `[lax]` section                 |
//!
//! Requesting a suite whose data is missing is an error
//! ([`Error::Inapplicable`]); under `all`, inapplicable suites are recorded
//! in the report's `skipped` list instead.

use crate::algebra;
use crate::benney;
use crate::chart::unit_draws;
use crate::compat;
use crate::error::{Error, Result};
use crate::flows;
use crate::geometry::{self, Connection};
use crate::hierarchy;
use crate::report::{CheckAccumulator, CheckReport, CheckResult, Orders, SkippedSuite, Verdict};
use crate::residual::{ResidualSample, Tolerance};
use crate::specfile::ManifoldSpec;
use crate::tensor::{ChartTensor, EvalTensor, TensorEntry, TensorSource, Valence};

/// The named suites, in canonical execution order.
pub const SUITES: [&str; 6] = ["algebra", "flows", "flat", "compat", "riemannian", "benney"];

/// Jet order used for pointwise tensor evaluation throughout the suites.
pub const POINTWISE_ORDER: usize = 2;

/// Parameters of a verification run.  `tolerance` is the base tolerance;
/// individual checks scale it by [`tolerance_factor`].  `order` is the
/// series truncation used for hierarchy construction.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: usize,
    pub tolerance: Tolerance,
    pub order: usize,
}

impl RunConfig {
    /// Defaults from the spec file (seed/samples/tolerances), series order 8.
    pub fn from_spec(spec: &ManifoldSpec) -> RunConfig {
        RunConfig {
            seed: spec.seed,
            samples: spec.samples,
            tolerance: spec.tolerance,
            order: 8,
        }
    }
}

/// Per-check tolerance multiplier.  Checks that compound many derivative
/// evaluations (series recursion, Tsarev system, Loewner sampling) get one
/// extra decade; third-derivative checks (semi-Hamiltonian) get two.
pub fn tolerance_factor(name: &str) -> f64 {
    match name {
        "compat/semi-hamiltonian" | "benney/semi-hamiltonian" => 100.0,
        "flat/hierarchy-recursion"
        | "flat/hierarchy-commutation"
        | "compat/tsarev-compatibility"
        | "compat/tsarev-admissible"
        | "benney/critical-points"
        | "benney/loewner"
        | "benney/gibbons-tsarev"
        | "benney/lambda-pp-identity"
        | "benney/moment-chain"
        | "benney/residue-pairing"
        | "benney/velocity-admissibility"
        | "benney/tsarev-compatibility" => 10.0,
        _ => 1.0,
    }
}

/// Derive an independent stream seed from the run seed and a fixed tag, so
/// auxiliary draws (random fields, jet states, boundary data) do not collide
/// with the box sampler.
pub fn aux_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

fn applicability(spec: &ManifoldSpec, suite: &str) -> std::result::Result<(), String> {
    match suite {
        "algebra" | "flows" => {
            if spec.structure.is_some() {
                Ok(())
            } else {
                Err("no structure constants declared".to_string())
            }
        }
        "flat" | "compat" => {
            if spec.structure.is_none() {
                Err("no structure constants declared".to_string())
            } else if !spec.declares_connection() {
                Err("no connection or metric declared".to_string())
            } else {
                Ok(())
            }
        }
        "riemannian" => {
            if spec.structure.is_none() {
                Err("no structure constants declared".to_string())
            } else if spec.metric.is_none() {
                Err("no metric declared".to_string())
            } else {
                Ok(())
            }
        }
        "benney" => {
            if spec.lax.is_some() {
                Ok(())
            } else {
                Err("no lax section".to_string())
            }
        }
        _ => unreachable!("applicability called with unknown suite"),
    }
}

/// Run one named suite (or `all`) against a spec and assemble the report.
///
/// Errors: unknown suite names are [`Error::InvalidArgument`]; a named suite
/// whose required data is absent is [`Error::Inapplicable`]; `all` with *no*
/// applicable suite is also inapplicable.  Per-point evaluation failures do
/// not abort the run — they are counted on the affected checks and fail a
/// check once they exceed 10% of its points.
pub fn run_suite(spec: &ManifoldSpec, suite: &str, cfg: &RunConfig) -> Result<CheckReport> {
    let requested: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(Error::InvalidArgument(format!(
            "unknown suite `{suite}`; available suites: algebra, flows, flat, compat, riemannian, benney, all"
        )));
    };

    let mut skipped = Vec::new();
    let mut active = Vec::new();
    for s in requested {
        match applicability(spec, s) {
            Ok(()) => active.push(s),
            Err(reason) => {
                if suite == "all" {
                    skipped.push(SkippedSuite {
                        suite: s.to_string(),
                        reason,
                    });
                } else {
                    return Err(Error::Inapplicable {
                        suite: s.to_string(),
                        spec: spec.name.clone(),
                        reason,
                    });
                }
            }
        }
    }
    if active.is_empty() {
        return Err(Error::Inapplicable {
            suite: "all".to_string(),
            spec: spec.name.clone(),
            reason: "no declared data matches any suite (needs structure constants, a connection \
                     or metric, or a lax section)"
                .to_string(),
        });
    }

    let points = spec.sample_box.sample(cfg.seed, cfg.samples);
    let mut checks: Vec<CheckResult> = Vec::new();
    for s in &active {
        match *s {
            "algebra" => algebra_checks(spec, cfg, &points, &mut checks),
            "flows" => flows_checks(spec, cfg, &points, &mut checks),
            "flat" => flat_checks(spec, cfg, &points, &mut checks),
            "compat" => compat_checks(spec, cfg, &points, &mut checks),
            "riemannian" => riemannian_checks(spec, cfg, &points, &mut checks),
            "benney" => benney_checks(spec, cfg, &points, &mut checks),
            _ => unreachable!(),
        }
    }
    checks.sort_by(|a, b| a.name.cmp(&b.name));

    let verdict = if checks.iter().all(|c| c.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(CheckReport {
        format: crate::report::REPORT_FORMAT,
        spec: spec.name.clone(),
        suite: suite.to_string(),
        rng: crate::chart::RNG_NAME,
        seed: cfg.seed,
        samples: cfg.samples,
        orders: Orders {
            pointwise: POINTWISE_ORDER,
            series: cfg.order,
        },
        checks,
        skipped,
        warnings: spec.warnings.clone(),
        verdict,
    })
}

fn acc(cfg: &RunConfig, name: &str) -> CheckAccumulator {
    let f = tolerance_factor(name);
    CheckAccumulator::new(
        name,
        Tolerance::new(cfg.tolerance.abs * f, cfg.tolerance.rel * f),
    )
}

/// Constant vector field as an `EvalTensor` (all derivatives zero).
fn constant_vector(n: usize, order: usize, values: &[f64]) -> EvalTensor {
    EvalTensor::new(
        n,
        Valence::VECTOR,
        order,
        algebra::constant_field(n, order, values),
    )
}

// ---------------------------------------------------------------------------
// algebra: pointwise multiplication identities.
// ---------------------------------------------------------------------------

fn algebra_checks(
    spec: &ManifoldSpec,
    cfg: &RunConfig,
    points: &[Vec<f64>],
    out: &mut Vec<CheckResult>,
) {
    let c_t = spec.structure.as_ref().expect("algebra needs structure");
    let n = spec.dim();
    let canonical = spec.structure_is_canonical_pattern();
    let unity = spec.field("e");

    let mut a_comm = acc(cfg, "algebra/commutativity");
    let mut a_assoc = acc(cfg, "algebra/associativity");
    let mut a_hm = acc(cfg, "algebra/hertling-manin");
    let mut a_haan = acc(cfg, "algebra/haantjes");
    let mut a_unity = unity.map(|_| acc(cfg, "algebra/unity"));
    let mut a_diag = canonical.then(|| acc(cfg, "algebra/diagonal-structure"));

    // Three fixed directions for the Haantjes operator check, shared by all
    // points so the report stays deterministic.
    let zs: Vec<Vec<f64>> = (0..3)
        .map(|k| unit_draws(aux_seed(cfg.seed, 11 + k as u64), n))
        .collect();

    for p in points {
        let c = match c_t.eval(p, POINTWISE_ORDER, &spec.params) {
            Ok(c) => c,
            Err(e) => {
                a_comm.add_error(p, &e);
                a_assoc.add_error(p, &e);
                a_hm.add_error(p, &e);
                a_haan.add_error(p, &e);
                if let Some(a) = a_unity.as_mut() {
                    a.add_error(p, &e);
                }
                if let Some(a) = a_diag.as_mut() {
                    a.add_error(p, &e);
                }
                continue;
            }
        };
        a_comm.add(p, algebra::commutativity(&c));
        a_assoc.add(p, algebra::associativity(&c));
        a_hm.add(p, algebra::hertling_manin(&c));

        let mut haan = ResidualSample::ZERO;
        for z in &zs {
            let v = algebra::v_endomorphism(&c, z);
            haan = haan.merge(algebra::haantjes(&v));
        }
        a_haan.add(p, haan);

        if let (Some(a), Some(e_t)) = (a_unity.as_mut(), unity) {
            match e_t.eval(p, POINTWISE_ORDER, &spec.params) {
                Ok(e) => {
                    let v = algebra::v_field(&c, &e);
                    let mut defect = 0.0f64;
                    let mut scale = 1.0f64;
                    for i in 0..n {
                        for j in 0..n {
                            let want = if i == j { 1.0 } else { 0.0 };
                            defect = defect.max((v.v(&[i, j]) - want).abs());
                            scale = scale.max(v.v(&[i, j]).abs());
                        }
                    }
                    a.add(p, ResidualSample::new(defect, scale));
                }
                Err(e) => a.add_error(p, &e),
            }
        }
        if let Some(a) = a_diag.as_mut() {
            let ds = algebra::diagonal_structure(&c);
            let mut s = ds.off_pattern;
            if let Some(dep) = ds.dependence {
                s = s.merge(dep);
            }
            a.add(p, s);
        }
    }

    let total = points.len();
    out.push(a_comm.finish(total));
    out.push(a_assoc.finish(total));
    out.push(a_hm.finish(total));
    out.push(a_haan.finish(total));
    if let Some(a) = a_unity {
        out.push(a.finish(total));
    }
    if let Some(a) = a_diag {
        out.push(a.finish(total));
    }
}

// ---------------------------------------------------------------------------
// flows: first-order commutativity criterion and its jet-space oracle.
// ---------------------------------------------------------------------------

fn flows_checks(
    spec: &ManifoldSpec,
    cfg: &RunConfig,
    points: &[Vec<f64>],
    out: &mut Vec<CheckResult>,
) {
    let c_t = spec.structure.as_ref().expect("flows needs structure");
    let n = spec.dim();
    let unity = spec.field("e");

    let mut f_self = acc(cfg, "flows/self-commutes");
    let mut f_agree = acc(cfg, "flows/criterion-oracle-agreement");
    let mut f_unity = unity.map(|_| acc(cfg, "flows/unity-criterion"));

    let x_poly = flows::random_polynomial_field(&spec.chart, 2, aux_seed(cfg.seed, 31));
    let y_poly = flows::random_polynomial_field(&spec.chart, 2, aux_seed(cfg.seed, 34));
    let zdir = unit_draws(aux_seed(cfg.seed, 32), n);
    let wdir = unit_draws(aux_seed(cfg.seed, 33), n);

    for p in points {
        let c = match c_t.eval(p, 1, &spec.params) {
            Ok(c) => c,
            Err(e) => {
                f_self.add_error(p, &e);
                if let Some(a) = f_unity.as_mut() {
                    a.add_error(p, &e);
                }
                continue;
            }
        };
        match x_poly.eval(p, 1) {
            Ok(x) => f_self.add(
                p,
                flows::iff_commutativity_residual(&c, &x, &x, Some(&zdir), Some(&wdir)),
            ),
            Err(e) => f_self.add_error(p, &e),
        }
        if let (Some(a), Some(e_t)) = (f_unity.as_mut(), unity) {
            match (e_t.eval(p, 1, &spec.params), y_poly.eval(p, 1)) {
                (Ok(e), Ok(y)) => {
                    a.add(p, flows::iff_commutativity_residual(&c, &e, &y, None, None))
                }
                (Err(e), _) | (_, Err(e)) => a.add_error(p, &e),
            }
        }
    }

    // Verdict agreement between the derivative criterion and the jet-space
    // commutator oracle, over a few random polynomial field pairs.  One
    // sample per pair: residual 0 when the two verdicts agree, 1 otherwise.
    let verdict_tol = Tolerance::new(
        cfg.tolerance.abs.max(1e-8),
        cfg.tolerance.rel.max(1e-8),
    );
    let pairs = 3usize;
    for pair in 0..pairs {
        let x_poly = flows::random_polynomial_field(&spec.chart, 2, aux_seed(cfg.seed, 40 + 2 * pair as u64));
        let y_poly = flows::random_polynomial_field(&spec.chart, 2, aux_seed(cfg.seed, 41 + 2 * pair as u64));
        let mut crit = ResidualSample::ZERO;
        let mut oracle = ResidualSample::ZERO;
        let mut worst_point: &[f64] = &[];
        let mut failed = false;
        for (k, p) in points.iter().enumerate() {
            let evals = (|| -> Result<(ResidualSample, f64)> {
                let c = c_t.eval(p, 1, &spec.params)?;
                let x = x_poly.eval(p, 1)?;
                let y = y_poly.eval(p, 1)?;
                let cr = flows::iff_commutativity_residual(&c, &x, &y, None, None);
                let state = flows::JetState::random(
                    p.clone(),
                    aux_seed(cfg.seed, 100 + (pair * points.len() + k) as u64),
                );
                let com = flows::oracle_flow_commutator(&c, &x, &y, &state);
                let m = com.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                Ok((cr, m))
            })();
            match evals {
                Ok((cr, m)) => {
                    if cr.residual >= crit.residual {
                        worst_point = p;
                    }
                    crit = crit.merge(cr);
                    oracle = oracle.merge(ResidualSample::new(m, 1.0));
                }
                Err(e) => {
                    f_agree.add_error(p, &e);
                    failed = true;
                }
            }
        }
        if !failed {
            // Use a shared scale so both verdicts see the same threshold.
            let scale = crit.scale.max(oracle.scale);
            let crit_pass = verdict_tol.passes(&ResidualSample::new(crit.residual, scale));
            let oracle_pass = verdict_tol.passes(&ResidualSample::new(oracle.residual, scale));
            let disagreement = if crit_pass == oracle_pass { 0.0 } else { 1.0 };
            let wp: Vec<f64> = if worst_point.is_empty() {
                points.first().cloned().unwrap_or_default()
            } else {
                worst_point.to_vec()
            };
            f_agree.add(&wp, ResidualSample::new(disagreement, 1.0));
        }
    }

    let total = points.len();
    out.push(f_self.finish(total));
    out.push(f_agree.finish(pairs));
    if let Some(a) = f_unity {
        out.push(a.finish(total));
    }
}

// ---------------------------------------------------------------------------
// flat: flat compatible connection and the primary hierarchy.
// ---------------------------------------------------------------------------

fn flat_checks(
    spec: &ManifoldSpec,
    cfg: &RunConfig,
    points: &[Vec<f64>],
    out: &mut Vec<CheckResult>,
) {
    let c_t = spec.structure.as_ref().expect("flat needs structure");
    let nabla = spec.nabla();
    let n = spec.dim();

    let mut c_flat = acc(cfg, "flat/flatness");
    let mut c_tor = acc(cfg, "flat/torsion");
    let mut c_compat = acc(cfg, "flat/compatibility");
    let mut c_def = acc(cfg, "flat/deformed-flatness");

    for p in points {
        let pair = (|| -> Result<(EvalTensor, EvalTensor)> {
            Ok((
                nabla.gamma(p, 1, &spec.params)?,
                c_t.eval(p, 1, &spec.params)?,
            ))
        })();
        match pair {
            Ok((gamma, c)) => {
                let r = geometry::curvature(&gamma);
                c_flat.add(p, ResidualSample::new(r.max_abs(), r.term_scale().max(1.0)));
                let t = geometry::torsion(&gamma);
                c_tor.add(
                    p,
                    ResidualSample::new(t.max_abs_value(), gamma.max_abs_value().max(1.0)),
                );
                c_compat.add(p, hierarchy::compatibility_residual(&c, &gamma).worst());
                let mut worst = ResidualSample::ZERO;
                for z in [1.0, -2.0] {
                    let gz = geometry::deformed_gamma(&gamma, &c, z);
                    let rz = geometry::curvature(&gz);
                    worst = worst.merge(ResidualSample::new(
                        rz.max_abs(),
                        rz.term_scale().max(1.0),
                    ));
                }
                c_def.add(p, worst);
            }
            Err(e) => {
                c_flat.add_error(p, &e);
                c_tor.add_error(p, &e);
                c_compat.add_error(p, &e);
                c_def.add_error(p, &e);
            }
        }
    }

    // Series-level checks at the box centre: build the hierarchy to two
    // levels and verify the recursion, pairwise flow commutation, and the
    // deformed parallel-frame criterion along each chain.
    let center = spec.sample_box.center();
    let mut h_rec = acc(cfg, "flat/hierarchy-recursion");
    let mut h_comm = acc(cfg, "flat/hierarchy-commutation");
    let mut h_def = acc(cfg, "flat/deformed-parallel");
    let mut rec_samples = 0usize;
    let mut comm_samples = 0usize;
    let mut def_samples = 0usize;

    match hierarchy::build_hierarchy(&spec.chart, &nabla, c_t, &center, n, 2, cfg.order, &spec.params)
    {
        Ok(h) => {
            for p in 1..=n {
                for alpha in 1..=2usize {
                    rec_samples += 1;
                    match hierarchy::recursion_residual(
                        h.member(p, alpha - 1),
                        h.member(p, alpha),
                        &nabla,
                        c_t,
                        &center,
                        &spec.params,
                    ) {
                        Ok(s) => h_rec.add(&center, s),
                        Err(e) => h_rec.add_error(&center, &e),
                    }
                }
            }

            match c_t.eval(&center, 1, &spec.params) {
                Ok(c) => {
                    let mut evs = Vec::new();
                    for m in h.members() {
                        match m.series.eval(&center, 1) {
                            Ok(x) => evs.push(x),
                            Err(e) => h_comm.add_error(&center, &e),
                        }
                    }
                    let mut worst = ResidualSample::ZERO;
                    for i in 0..evs.len() {
                        for j in (i + 1)..evs.len() {
                            worst =
                                worst.merge(flows::sufficient_condition_residual(&c, &evs[i], &evs[j]).residual);
                        }
                    }
                    comm_samples = 1;
                    h_comm.add(&center, worst);
                }
                Err(e) => {
                    comm_samples = 1;
                    h_comm.add_error(&center, &e);
                }
            }

            for p in 1..=n {
                let chain: Vec<hierarchy::SeriesVectorField> =
                    (0..=2).map(|a| h.member(p, a).clone()).collect();
                for z in [0.0, 1.0, -2.0] {
                    def_samples += 1;
                    match hierarchy::deformed_flatness_residual(
                        &chain,
                        &nabla,
                        c_t,
                        z,
                        &center,
                        &spec.params,
                    ) {
                        Ok(s) => h_def.add(&center, s),
                        Err(e) => h_def.add_error(&center, &e),
                    }
                }
            }
        }
        Err(e) => {
            rec_samples = 1;
            comm_samples = 1;
            def_samples = 1;
            h_rec.add_error(&center, &e);
            h_comm.add_error(&center, &e);
            h_def.add_error(&center, &e);
        }
    }

    let total = points.len();
    out.push(c_flat.finish(total));
    out.push(c_tor.finish(total));
    out.push(c_compat.finish(total));
    out.push(c_def.finish(total));
    out.push(h_rec.finish(rec_samples));
    out.push(h_comm.finish(comm_samples));
    out.push(h_def.finish(def_samples));
}

// ---------------------------------------------------------------------------
// compat: compatible (possibly curved) connections.
// ---------------------------------------------------------------------------

fn compat_checks(
    spec: &ManifoldSpec,
    cfg: &RunConfig,
    points: &[Vec<f64>],
    out: &mut Vec<CheckResult>,
) {
    let c_t = spec.structure.as_ref().expect("compat needs structure");
    let nabla = spec.nabla();
    let n = spec.dim();
    let canonical = spec.structure_is_canonical_pattern();

    let mut k_obs = acc(cfg, "compat/curvature-obstruction");
    let mut k_vec = acc(cfg, "compat/vectorwise-obstruction");
    let mut k_bia = acc(cfg, "compat/bianchi-form");
    let mut k_can = canonical.then(|| acc(cfg, "compat/canonical-identities"));
    let mut k_tsc = canonical.then(|| acc(cfg, "compat/tsarev-compatibility"));

    let xdir = unit_draws(aux_seed(cfg.seed, 61), n);

    for p in points {
        let pair = (|| -> Result<(EvalTensor, EvalTensor)> {
            Ok((
                nabla.gamma(p, 1, &spec.params)?,
                c_t.eval(p, 1, &spec.params)?,
            ))
        })();
        match pair {
            Ok((gamma, c)) => {
                k_obs.add(p, compat::curvature_obstruction_residual(&c, &gamma));
                let x = constant_vector(n, 1, &xdir);
                k_vec.add(p, compat::vectorwise_obstruction_residual(&x, &c, &gamma));
                k_bia.add(p, compat::bianchi_form_residual(&c, &gamma));
                if let Some(a) = k_can.as_mut() {
                    let ids = compat::canonical_connection_identities(&gamma);
                    a.add(p, ids.pair_sum.merge(ids.distinct_entries));
                }
                if let Some(a) = k_tsc.as_mut() {
                    a.add(p, compat::tsarev_compatibility_residual(&gamma));
                }
            }
            Err(e) => {
                k_obs.add_error(p, &e);
                k_vec.add_error(p, &e);
                k_bia.add_error(p, &e);
                if let Some(a) = k_can.as_mut() {
                    a.add_error(p, &e);
                }
                if let Some(a) = k_tsc.as_mut() {
                    a.add_error(p, &e);
                }
            }
        }
    }

    let total = points.len();
    out.push(k_obs.finish(total));
    out.push(k_vec.finish(total));
    out.push(k_bia.finish(total));
    if let Some(a) = k_can {
        out.push(a.finish(total));
    }
    if let Some(a) = k_tsc {
        out.push(a.finish(total));
    }

    let center = spec.sample_box.center();
    if canonical {
        // Diagonal route: integrate the Tsarev system from random boundary
        // polynomials, then test the solution's velocity field for
        // admissibility and the semi-Hamiltonian property.
        let mut k_adm = acc(cfg, "compat/tsarev-admissible");
        let mut k_sh = acc(cfg, "compat/semi-hamiltonian");
        let k_order = cfg.order.clamp(2, 4);
        let run = (|| -> Result<(ResidualSample, ResidualSample)> {
            let gamma = nabla.gamma(&center, k_order, &spec.params)?;
            let c = c_t.eval(&center, 1, &spec.params)?;
            let draws = unit_draws(aux_seed(cfg.seed, 71), n * 3);
            let boundary: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    vec![
                        center[i] + 0.25 * draws[3 * i],
                        1.0 + 0.5 * draws[3 * i + 1],
                        0.5 * draws[3 * i + 2],
                    ]
                })
                .collect();
            let sol = compat::tsarev_solve(&spec.chart, &gamma, &center, &boundary, k_order)?;
            let v1 = sol.series.eval(&center, 1)?;
            let adm = compat::admissible_residual(&v1, &c, &gamma);
            let v2 = sol.series.eval(&center, 2)?;
            let sh = compat::semi_hamiltonian_residual(&v2)?;
            Ok((adm, sh))
        })();
        match run {
            Ok((adm, sh)) => {
                k_adm.add(&center, adm);
                k_sh.add(&center, sh);
            }
            Err(e) => {
                k_adm.add_error(&center, &e);
                k_sh.add_error(&center, &e);
            }
        }
        out.push(k_adm.finish(1));
        out.push(k_sh.finish(1));
    } else {
        // Flat route: hierarchy members at level one are admissible fields.
        let mut k_adm = acc(cfg, "compat/admissible-fields");
        let mut samples = 0usize;
        let run = (|| -> Result<Vec<ResidualSample>> {
            let h = hierarchy::build_hierarchy(
                &spec.chart,
                &nabla,
                c_t,
                &center,
                n,
                1,
                cfg.order.min(4).max(2),
                &spec.params,
            )?;
            let gamma = nabla.gamma(&center, 1, &spec.params)?;
            let c = c_t.eval(&center, 1, &spec.params)?;
            let mut res = Vec::new();
            for m in h.members() {
                if m.alpha == 1 {
                    let x = m.series.eval(&center, 1)?;
                    res.push(compat::admissible_residual(&x, &c, &gamma));
                }
            }
            Ok(res)
        })();
        match run {
            Ok(res) => {
                samples = res.len();
                for s in res {
                    k_adm.add(&center, s);
                }
            }
            Err(e) => {
                samples = 1;
                k_adm.add_error(&center, &e);
            }
        }
        out.push(k_adm.finish(samples));
    }
}

// ---------------------------------------------------------------------------
// riemannian: metric invariance, Egorov property, quadratic expansions.
// ---------------------------------------------------------------------------

fn riemannian_checks(
    spec: &ManifoldSpec,
    cfg: &RunConfig,
    points: &[Vec<f64>],
    out: &mut Vec<CheckResult>,
) {
    let c_t = spec.structure.as_ref().expect("riemannian needs structure");
    let g_t = spec.metric.as_ref().expect("riemannian needs metric");
    let n = spec.dim();
    let canonical = spec.structure_is_canonical_pattern();

    let mut r_inv = acc(cfg, "riemannian/invariance");
    let mut r_ego = canonical.then(|| acc(cfg, "riemannian/egorov"));
    let mut r_qexp = acc(cfg, "riemannian/quadratic-expansion");

    // Two fixed constant fields with opposite signs for the quadratic
    // expansion: E^{lq} = X X^T − Y Y^T.
    let f1 = unit_draws(aux_seed(cfg.seed, 81), n);
    let f2 = unit_draws(aux_seed(cfg.seed, 82), n);
    let make_const = |v: &[f64]| -> Result<ChartTensor> {
        let entries: Vec<TensorEntry> = (0..n)
            .map(|i| TensorEntry {
                idx: vec![i + 1],
                expr: crate::expr::FieldExpr::constant(v[i]),
            })
            .collect();
        let (t, _) =
            ChartTensor::from_entries(spec.chart.clone(), Valence::VECTOR, &entries, false)?;
        Ok(t)
    };
    let qexp = (|| -> Result<compat::QuadraticExpansion> {
        compat::QuadraticExpansion::new(
            vec![make_const(&f1)?, make_const(&f2)?],
            vec![1.0, -1.0],
        )
    })();

    for p in points {
        match (
            g_t.eval(p, 1, &spec.params),
            c_t.eval(p, 0, &spec.params),
        ) {
            (Ok(g), Ok(c)) => {
                match compat::invariance_residual(&g, &c) {
                    Ok(s) => r_inv.add(p, s),
                    Err(e) => r_inv.add_error(p, &e),
                }
                if let Some(a) = r_ego.as_mut() {
                    a.add(p, compat::egorov_check(&g).worst());
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                r_inv.add_error(p, &e);
                if let Some(a) = r_ego.as_mut() {
                    a.add_error(p, &e);
                }
            }
        }
        match &qexp {
            Ok(q) => match compat::quadratic_expansion_check(q, g_t, c_t, p, &spec.params) {
                Ok(m) => r_qexp.add(p, m.obstruction_identity),
                Err(e) => r_qexp.add_error(p, &e),
            },
            Err(e) => r_qexp.add_error(p, e),
        }
    }

    let total = points.len();
    out.push(r_inv.finish(total));
    if let Some(a) = r_ego {
        out.push(a.finish(total));
    }
    out.push(r_qexp.finish(total));
}

// ---------------------------------------------------------------------------
// benney: dispersionless-Lax reductions and the induced structures.
// ---------------------------------------------------------------------------

/// Names of the pointwise structure checks run by the benney suite on the
/// manifold assembled at each sample point, in `items()` order.
const MANIFOLD_ITEMS: [&str; 8] = [
    "egorov",
    "metric-invariance",
    "curvature-obstruction",
    "canonical-connection",
    "tsarev-compatibility",
    "velocity-admissibility",
    "semi-hamiltonian",
    "special-curvature",
];

fn benney_checks(
    spec: &ManifoldSpec,
    cfg: &RunConfig,
    points: &[Vec<f64>],
    out: &mut Vec<CheckResult>,
) {
    let lax = spec.lax.as_ref().expect("benney needs a lax section");
    let twist = spec.twist.as_ref();

    let mut b_mom = acc(cfg, "benney/moments-asymptotics");
    let mut b_crit = acc(cfg, "benney/critical-points");
    let mut b_loe = acc(cfg, "benney/loewner");
    let mut b_gt = acc(cfg, "benney/gibbons-tsarev");
    let mut b_lpp = acc(cfg, "benney/lambda-pp-identity");
    let mut b_chain = acc(cfg, "benney/moment-chain");
    let mut b_pair = acc(cfg, "benney/residue-pairing");
    let mut b_items: Vec<CheckAccumulator> = MANIFOLD_ITEMS
        .iter()
        .map(|i| acc(cfg, &format!("benney/{i}")))
        .collect();

    for p in points {
        match benney::moments(lax, p, 1, 3) {
            Ok(_) => b_mom.add(p, ResidualSample::new(0.0, 1.0)),
            Err(e) => b_mom.add_error(p, &e),
        }

        let red = match benney::riemann_invariants(lax, p) {
            Ok(r) => r,
            Err(e) => {
                b_crit.add_error(p, &e);
                b_loe.add_error(p, &e);
                b_gt.add_error(p, &e);
                b_lpp.add_error(p, &e);
                b_chain.add_error(p, &e);
                b_pair.add_error(p, &e);
                for a in b_items.iter_mut() {
                    a.add_error(p, &e);
                }
                continue;
            }
        };

        // Critical points: λ_p must vanish there; scale by λ_pp·(1+|v|).
        {
            let mut s = ResidualSample::ZERO;
            let mut err = None;
            for &v in red.critical_points() {
                match lax.lambda_p_pp(v, p) {
                    Ok((fp, fpp)) => {
                        s = s.merge(ResidualSample::new(
                            fp.abs(),
                            (fpp.abs() * (1.0 + v.abs())).max(1.0),
                        ));
                    }
                    Err(e) => err = Some(e),
                }
            }
            match err {
                None => b_crit.add(p, s),
                Some(e) => b_crit.add_error(p, &e),
            }
        }

        // Loewner system probed at two points outside the critical range.
        {
            let vs = red.critical_points();
            let hi = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = vs.iter().cloned().fold(f64::INFINITY, f64::min);
            let spread = (hi - lo).max(1.0);
            let probes = [hi + 1.0 + 0.25 * spread, lo - 1.0 - 0.25 * spread];
            let mut s = ResidualSample::ZERO;
            let mut err = None;
            for p0 in probes {
                match benney::loewner_residual(lax, &red, p0) {
                    Ok(r) => s = s.merge(r),
                    Err(e) => err = Some(e),
                }
            }
            match err {
                None => b_loe.add(p, s),
                Some(e) => b_loe.add_error(p, &e),
            }
        }

        b_gt.add(p, benney::gibbons_tsarev_residual(&red).worst());
        match benney::lambda_pp_identity_residual(&red) {
            Ok(s) => b_lpp.add(p, s),
            Err(e) => b_lpp.add_error(p, &e),
        }
        match benney::moment_chain_residual(&red, 3) {
            Ok(s) => b_chain.add(p, s),
            Err(e) => b_chain.add_error(p, &e),
        }
        match benney::residue_pairing(lax, &red, twist)
            .and_then(|pr| benney::pairing_checks(&red, &pr, twist))
        {
            Ok(ch) => b_pair.add(p, ch.worst()),
            Err(e) => b_pair.add_error(p, &e),
        }

        match benney::manifold_at(&red, twist).and_then(|m| benney::check_manifold(&m)) {
            Ok(checks) => {
                for ((name, sample), a) in checks.items().into_iter().zip(b_items.iter_mut()) {
                    debug_assert!(a.tolerance() == acc(cfg, &format!("benney/{name}")).tolerance());
                    a.add(p, sample);
                }
            }
            Err(e) => {
                for a in b_items.iter_mut() {
                    a.add_error(p, &e);
                }
            }
        }
    }

    let total = points.len();
    out.push(b_mom.finish(total));
    out.push(b_crit.finish(total));
    out.push(b_loe.finish(total));
    out.push(b_gt.finish(total));
    out.push(b_lpp.finish(total));
    out.push(b_chain.finish(total));
    out.push(b_pair.finish(total));
    for a in b_items {
        out.push(a.finish(total));
    }
}
