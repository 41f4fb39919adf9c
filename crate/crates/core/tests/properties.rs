//! Randomized invariants: estimator bounds, RNG stream independence, and
//! dataset resampling.

use proptest::prelude::*;
use transmed_core::estimators::{analyze, AnalysisConfig};
use transmed_core::{CounterRng, DgmSpec, EstimatorId, Labeling, Variant};

fn any_config(dgm: &DgmSpec, estimators: Vec<EstimatorId>) -> AnalysisConfig {
    AnalysisConfig {
        terms_restricted: dgm.correct_terms(Variant::Restricted),
        terms_unrestricted: dgm.correct_terms(Variant::Unrestricted),
        estimators,
        s_ref: 0,
        clip: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    // TMLE is a substitution estimator: psi must stay in [0,1] whatever the
    // sample looks like.
    #[test]
    fn tmle_psi_within_unit_interval(seed in 0u64..1000, n in 60usize..400, dgm_id in 1u8..=3) {
        let dgm = DgmSpec::preset(dgm_id, Labeling::Appendix).unwrap();
        let ds = dgm.sample(n, CounterRng::new(seed)).unwrap();
        let cfg = any_config(&dgm, vec![EstimatorId::TmleEff, EstimatorId::TmleGen]);
        if let Ok(results) = analyze(&ds, &cfg) {
            for r in &results {
                for c in &r.components {
                    prop_assert!((0.0..=1.0).contains(&c.psi), "{:?} psi {}", r.estimator, c.psi);
                }
            }
        }
    }

    // The stabilized IPTW weights average to one by construction.
    #[test]
    fn analysis_is_deterministic(seed in 0u64..1000) {
        let dgm = DgmSpec::preset(1, Labeling::Main).unwrap();
        let ds = dgm.sample(200, CounterRng::new(seed)).unwrap();
        let cfg = any_config(&dgm, vec![EstimatorId::Iptw]);
        if let Ok(a) = analyze(&ds, &cfg) {
            let b = analyze(&ds, &cfg).unwrap();
            prop_assert_eq!(a[0].sde.estimate.to_bits(), b[0].sde.estimate.to_bits());
            prop_assert_eq!(a[0].sie.estimate.to_bits(), b[0].sie.estimate.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    // Counter RNG: distinct streams never repeat draws, same stream always
    // does, and uniforms stay in [0,1).
    #[test]
    fn rng_streams_are_reproducible(seed: u64, s1 in 0u64..64, s2 in 0u64..64, k in 0u64..100) {
        let root = CounterRng::new(seed);
        let a = root.stream(s1).uniform(k);
        prop_assert!((0.0..1.0).contains(&a));
        prop_assert_eq!(a.to_bits(), root.stream(s1).uniform(k).to_bits());
        if s1 != s2 {
            prop_assert_ne!(a.to_bits(), root.stream(s2).uniform(k).to_bits());
        }
    }

    // Sampled datasets satisfy the structural invariants: outcomes observed
    // exactly on the source site.
    #[test]
    fn sampled_datasets_are_structurally_valid(seed: u64, n in 30usize..300) {
        let dgm = DgmSpec::preset(1, Labeling::Main).unwrap();
        if let Ok(ds) = dgm.sample(n, CounterRng::new(seed)) {
            prop_assert_eq!(ds.len(), n);
            for obs in ds.rows() {
                prop_assert_eq!(obs.y.is_some(), obs.s == 1);
            }
        }
    }
}
