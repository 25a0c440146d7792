//! Shipped example manifolds, embedded as `fman-spec/1` documents.

use crate::error::{Error, Result};
use crate::specfile::ManifoldSpec;

/// Names of the shipped fixtures, in catalog order.
pub const NAMES: [&str; 5] = [
    "canonical-trivial",
    "dkdv-frobenius",
    "zakharov-2",
    "log-3",
    "broken-hm",
];

/// The `fman-spec/1` source text of a shipped fixture.
pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "canonical-trivial" => Some(include_str!("../fixtures/canonical-trivial.toml")),
        "dkdv-frobenius" => Some(include_str!("../fixtures/dkdv-frobenius.toml")),
        "zakharov-2" => Some(include_str!("../fixtures/zakharov-2.toml")),
        "log-3" => Some(include_str!("../fixtures/log-3.toml")),
        "broken-hm" => Some(include_str!("../fixtures/broken-hm.toml")),
        _ => None,
    }
}

/// Load a shipped fixture by name.
pub fn load(name: &str) -> Result<ManifoldSpec> {
    let src = source(name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "unknown fixture `{name}`; shipped fixtures: {}",
            NAMES.join(", ")
        ))
    })?;
    ManifoldSpec::from_toml_str(src)
}

/// All shipped fixtures as `(name, source)` pairs.
pub fn all() -> Vec<(&'static str, &'static str)> {
    NAMES
        .iter()
        .map(|&n| (n, source(n).expect("shipped fixture")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra;
    use crate::testsupport::ev;

    #[test]
    fn every_fixture_loads_and_matches_its_file_name() {
        for (name, _) in all() {
            let spec = load(name).unwrap();
            assert_eq!(spec.name, name);
            assert!(spec.warnings.is_empty(), "{name}: {:?}", spec.warnings);
        }
        assert!(load("missing").is_err());
    }

    #[test]
    fn dkdv_frobenius_has_dimension_two_and_four_nonzero_entries() {
        let spec = load("dkdv-frobenius").unwrap();
        assert_eq!(spec.dim(), 2);
        let c = spec.structure.as_ref().unwrap();
        let nonzero = c
            .components()
            .iter()
            .filter(|e| e.text() != "0")
            .count();
        assert_eq!(nonzero, 4);
        assert!(spec.metric.is_some());
        assert!(spec.declares_connection());
    }

    #[test]
    fn canonical_trivial_has_canonical_pattern() {
        let spec = load("canonical-trivial").unwrap();
        assert_eq!(spec.dim(), 3);
        assert!(spec.structure_is_canonical_pattern());
        assert!(spec.field("e").is_some());
    }

    #[test]
    fn reduction_fixtures_have_lax_and_nothing_pointwise() {
        for name in ["zakharov-2", "log-3"] {
            let spec = load(name).unwrap();
            assert!(spec.lax.is_some(), "{name}");
            assert!(spec.structure.is_none(), "{name}");
            assert!(!spec.declares_connection(), "{name}");
        }
        // The log-3 box keeps branch points separated by at least 0.5.
        let spec = load("log-3").unwrap();
        let r = spec.sample_box.ranges();
        assert!(r[1].0 - r[0].1 >= 0.5);
        assert!(r[2].0 - r[1].1 >= 0.5);
    }

    #[test]
    fn broken_hm_fails_the_integrability_identity_at_the_recorded_witness() {
        let spec = load("broken-hm").unwrap();
        let w = [0.7, 1.1, 0.9];
        assert!(spec.sample_box.contains(&w));
        let c = ev(spec.structure.as_ref().unwrap(), &w, 2);
        let a = algebra::associativity(&c);
        assert!(a.residual <= 1e-12 * a.scale.max(1.0));
        let hm = algebra::hertling_manin(&c);
        assert!(hm.residual > 1e-3, "witness residual {:.3e}", hm.residual);
    }
}
