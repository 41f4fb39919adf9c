//! Exact-enumeration oracle: true counterfactual means, true effects, and
//! efficiency bounds.
//!
//! Everything here is computed by summing over the full binary configuration
//! space with the generating conditional probabilities plugged in, so there
//! is no sampling noise anywhere in the truth values.

use crate::data::{InterventionSpec, Observation};
use crate::dgp::DgmSpec;
use crate::error::EstimationError;
use crate::terms::Variant;
use serde::Serialize;

/// Which contrast a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Contrast {
    Sde,
    Sie,
}

impl Contrast {
    pub fn label(self) -> &'static str {
        match self {
            Contrast::Sde => "sde",
            Contrast::Sie => "sie",
        }
    }
}

/// True values and efficiency bounds for one DGM and reference site.
#[derive(Debug, Clone, Serialize)]
pub struct TruthReport {
    pub dgm: u8,
    pub s_ref: u8,
    /// psi(a=1, a*=0), psi(a=0, a*=0), psi(a=1, a*=1).
    pub psi_10: f64,
    pub psi_00: f64,
    pub psi_11: f64,
    pub sde: f64,
    pub sie: f64,
    /// Variance of the restricted-model EIC contrast at the truth.
    pub eff_bound_sde: f64,
    pub eff_bound_sie: f64,
}

/// True stochastic-intervention density g*(M=1 | w2) for a spec.
fn gstar1(dgm: &DgmSpec, w2: u8, spec: InterventionSpec) -> f64 {
    (0..2u8)
        .map(|z| {
            let pz = dgm.p_z1(spec.a_star, w2, spec.s_ref);
            let pz_z = if z == 1 { pz } else { 1.0 - pz };
            dgm.p_m1(z, w2, spec.s_ref) * pz_z
        })
        .sum()
}

/// Exact counterfactual mean psi(a, a*) under the identification formula:
/// target-site covariate mixture, Z drawn at A=a in the target site, M drawn
/// from g*, outcome regression from the source site.
pub fn true_psi(dgm: &DgmSpec, spec: InterventionSpec) -> f64 {
    let mut psi = 0.0;
    let mut p_s0 = 0.0;
    for w1 in 0..2u8 {
        for w2 in 0..2u8 {
            let pw = 0.5 * bit(dgm.p_w2(w1), w2);
            let ps0_w = 1.0 - dgm.p_s1(w2);
            p_s0 += pw * ps0_w;
            let g1 = gstar1(dgm, w2, spec);
            let mut inner = 0.0;
            for z in 0..2u8 {
                let pz = bit(dgm.p_z1(spec.a, w2, 0), z);
                for m in 0..2u8 {
                    inner += pz * bit(g1, m) * dgm.p_y1(m, z, w2);
                }
            }
            psi += pw * ps0_w * inner;
        }
    }
    psi / p_s0
}

/// psi(a, ghat): the counterfactual mean with the stochastic-intervention
/// density held at a fitted model and everything else at the DGM truth.
/// This is the target the estimators chase — the intervention density is
/// itself estimated, so the estimand moves with the sample.
pub fn data_dependent_psi(
    dgm: &DgmSpec,
    fits: &crate::nuisance::NuisanceFits,
    spec: InterventionSpec,
) -> Result<f64, EstimationError> {
    let mut psi = 0.0;
    let mut p_s0 = 0.0;
    for w1 in 0..2u8 {
        for w2 in 0..2u8 {
            let pw = 0.5 * bit(dgm.p_w2(w1), w2);
            let ps0_w = 1.0 - dgm.p_s1(w2);
            p_s0 += pw * ps0_w;
            // Probe row: only W matters; Z/S (and A for the unrestricted
            // variant) are overridden inside the g* evaluation.
            let probe = Observation { s: 1, w1, w2, a: spec.a, z: 0, m: 0, y: Some(0) };
            let g1 = fits.stochastic_intervention(&probe, spec)?;
            let mut inner = 0.0;
            for z in 0..2u8 {
                let pz = bit(dgm.p_z1(spec.a, w2, 0), z);
                for m in 0..2u8 {
                    inner += pz * bit(g1, m) * dgm.p_y1(m, z, w2);
                }
            }
            psi += pw * ps0_w * inner;
        }
    }
    Ok(psi / p_s0)
}

#[inline]
fn bit(p1: f64, v: u8) -> f64 {
    if v == 1 {
        p1
    } else {
        1.0 - p1
    }
}

/// Marginal P(S = 0).
pub fn true_p_s0(dgm: &DgmSpec) -> f64 {
    (0..2u8)
        .flat_map(|w1| (0..2u8).map(move |w2| (w1, w2)))
        .map(|(w1, w2)| 0.5 * bit(dgm.p_w2(w1), w2) * (1.0 - dgm.p_s1(w2)))
        .sum()
}

/// EIC of one configuration at the truth for a given spec and variant.
fn eic_at_truth(
    dgm: &DgmSpec,
    variant: Variant,
    spec: InterventionSpec,
    psi: f64,
    p_s0: f64,
    w2: u8,
    s: u8,
    a_obs: u8,
    z: u8,
    m: u8,
    y: f64,
) -> f64 {
    let g1 = gstar1(dgm, w2, spec);
    let qy = |m: u8, z: u8| dgm.p_y1(m, z, w2);
    // Q_M depends on (z, w2) only: the generating Y equation has no S or A.
    let qm = |z: u8| (0..2u8).map(|mm| qy(mm, z) * bit(g1, mm)).sum::<f64>();
    let qz = |a: u8, s: u8| {
        (0..2u8)
            .map(|zz| bit(dgm.p_z1(a, w2, s), zz) * qm(zz))
            .sum::<f64>()
    };

    let ps1_w = dgm.p_s1(w2);
    let ps0_w = 1.0 - ps1_w;

    let d_y = if s == 1 {
        let num = bit(g1, m) * bit(dgm.p_z1(spec.a, w2, 0), z) * ps0_w;
        let (den, indicator) = match variant {
            Variant::Restricted => {
                let pz_marg = 0.5 * bit(dgm.p_z1(0, w2, 1), z) + 0.5 * bit(dgm.p_z1(1, w2, 1), z);
                (bit(dgm.p_m1(z, w2, 1), m) * pz_marg * ps1_w * p_s0, 1.0)
            }
            Variant::Unrestricted => (
                bit(dgm.p_m1(z, w2, 1), m) * bit(dgm.p_z1(spec.a, w2, 1), z) * 0.5 * ps1_w * p_s0,
                f64::from(a_obs == spec.a),
            ),
        };
        indicator * (y - qy(m, z)) * num / den
    } else {
        0.0
    };

    let d_z = if s == 0 && a_obs == spec.a {
        (qm(z) - qz(spec.a, s)) / (0.5 * p_s0)
    } else {
        0.0
    };

    let d_w = if s == 0 { (qz(spec.a, s) - psi) / p_s0 } else { 0.0 };

    d_y + d_z + d_w
}

/// Exact variance of the EIC contrast at the truth, i.e. the per-observation
/// efficiency bound when the restricted EIC is used.
pub fn efficiency_bound(
    dgm: &DgmSpec,
    contrast: Contrast,
    variant: Variant,
    s_ref: u8,
) -> f64 {
    let [spec_10, spec_00, spec_11] = InterventionSpec::effect_triple(s_ref);
    let (spec_hi, spec_lo) = match contrast {
        Contrast::Sde => (spec_10, spec_00),
        Contrast::Sie => (spec_11, spec_10),
    };
    let psi_hi = true_psi(dgm, spec_hi);
    let psi_lo = true_psi(dgm, spec_lo);
    let p_s0 = true_p_s0(dgm);

    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    for bits in 0..64u32 {
        let b = |k: u32| ((bits >> k) & 1) as u8;
        let (w1, w2, s, a, z, m) = (b(0), b(1), b(2), b(3), b(4), b(5));
        let p_base = 0.5
            * bit(dgm.p_w2(w1), w2)
            * bit(dgm.p_s1(w2), s)
            * 0.5
            * bit(dgm.p_z1(a, w2, s), z)
            * bit(dgm.p_m1(z, w2, s), m);
        let y_levels: &[(f64, f64)] = if s == 1 {
            &[(0.0, 0.0), (1.0, 1.0)]
        } else {
            &[(0.0, f64::NAN)] // y never read when s = 0
        };
        for &(yv, _) in y_levels {
            let py = if s == 1 { bit(dgm.p_y1(m, z, w2), yv as u8) } else { 1.0 };
            let p = p_base * py;
            if p == 0.0 {
                continue;
            }
            let d = eic_at_truth(dgm, variant, spec_hi, psi_hi, p_s0, w2, s, a, z, m, yv)
                - eic_at_truth(dgm, variant, spec_lo, psi_lo, p_s0, w2, s, a, z, m, yv);
            mean += p * d;
            mean_sq += p * d * d;
        }
    }
    mean_sq - mean * mean
}

/// Mean of the EIC contrast at truth; zero up to float rounding.
pub fn eic_contrast_mean(dgm: &DgmSpec, contrast: Contrast, variant: Variant, s_ref: u8) -> f64 {
    let [spec_10, spec_00, spec_11] = InterventionSpec::effect_triple(s_ref);
    let (spec_hi, spec_lo) = match contrast {
        Contrast::Sde => (spec_10, spec_00),
        Contrast::Sie => (spec_11, spec_10),
    };
    let psi_hi = true_psi(dgm, spec_hi);
    let psi_lo = true_psi(dgm, spec_lo);
    let p_s0 = true_p_s0(dgm);
    let mut mean = 0.0;
    for bits in 0..64u32 {
        let b = |k: u32| ((bits >> k) & 1) as u8;
        let (w1, w2, s, a, z, m) = (b(0), b(1), b(2), b(3), b(4), b(5));
        let p_base = 0.5
            * bit(dgm.p_w2(w1), w2)
            * bit(dgm.p_s1(w2), s)
            * 0.5
            * bit(dgm.p_z1(a, w2, s), z)
            * bit(dgm.p_m1(z, w2, s), m);
        let ys: &[f64] = if s == 1 { &[0.0, 1.0] } else { &[0.0] };
        for &yv in ys {
            let py = if s == 1 { bit(dgm.p_y1(m, z, w2), yv as u8) } else { 1.0 };
            let d = eic_at_truth(dgm, variant, spec_hi, psi_hi, p_s0, w2, s, a, z, m, yv)
                - eic_at_truth(dgm, variant, spec_lo, psi_lo, p_s0, w2, s, a, z, m, yv);
            mean += p_base * py * d;
        }
    }
    mean
}

/// Full truth report for a DGM and reference site.
pub fn truth_report(dgm: &DgmSpec, s_ref: u8) -> TruthReport {
    let [spec_10, spec_00, spec_11] = InterventionSpec::effect_triple(s_ref);
    let psi_10 = true_psi(dgm, spec_10);
    let psi_00 = true_psi(dgm, spec_00);
    let psi_11 = true_psi(dgm, spec_11);
    TruthReport {
        dgm: dgm.id,
        s_ref,
        psi_10,
        psi_00,
        psi_11,
        sde: psi_10 - psi_00,
        sie: psi_11 - psi_10,
        eff_bound_sde: efficiency_bound(dgm, Contrast::Sde, Variant::Restricted, s_ref),
        eff_bound_sie: efficiency_bound(dgm, Contrast::Sie, Variant::Restricted, s_ref),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn psi_is_constant_when_outcome_is_constant() {
        // Zero out the outcome equation: E[Y | anything] = expit(c).
        let mut dgm = DgmSpec::appendix(1).unwrap();
        dgm.y.terms.clear();
        dgm.y.intercept = crate::glm::logit(0.7);
        for spec in InterventionSpec::effect_triple(0) {
            assert_abs_diff_eq!(true_psi(&dgm, spec), 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn psi_reduces_to_outcome_at_forced_mediator() {
        // g* puts all mass on m=1 (M equation forced to 1) and Y depends
        // only on M, so psi = E[Y | M=1].
        let mut dgm = DgmSpec::appendix(1).unwrap();
        dgm.m.terms.clear();
        dgm.m.intercept = 40.0; // expit(40) ~ 1 to double precision
        dgm.y.terms = vec![(1.5, vec![crate::terms::Var::M])];
        dgm.y.intercept = -0.5;
        let spec = InterventionSpec::new(1, 0, 0);
        assert_abs_diff_eq!(true_psi(&dgm, spec), crate::glm::expit(1.0), epsilon = 1e-10);
    }

    #[test]
    fn eic_contrast_has_mean_zero_at_truth() {
        for id in 1..=3u8 {
            let dgm = DgmSpec::appendix(id).unwrap();
            for variant in [Variant::Restricted, Variant::Unrestricted] {
                for contrast in [Contrast::Sde, Contrast::Sie] {
                    let mean = eic_contrast_mean(&dgm, contrast, variant, 0);
                    assert!(mean.abs() < 1e-12, "dgm {id}: EIC mean {mean}");
                }
            }
        }
    }

    #[test]
    fn restricted_bound_never_exceeds_unrestricted_variance() {
        for id in 1..=3u8 {
            let dgm = DgmSpec::appendix(id).unwrap();
            for contrast in [Contrast::Sde, Contrast::Sie] {
                let restricted = efficiency_bound(&dgm, contrast, Variant::Restricted, 0);
                let unrestricted = efficiency_bound(&dgm, contrast, Variant::Unrestricted, 0);
                assert!(restricted > 0.0);
                assert!(
                    restricted <= unrestricted + 1e-12,
                    "dgm {id} {contrast:?}: {restricted} > {unrestricted}"
                );
            }
        }
    }

    #[test]
    fn monte_carlo_cross_check_of_true_psi() {
        // Independent oracle: simulate the identified functional directly by
        // drawing (W | S=0), Z at A=a in the target site, M from g*, and Y
        // from the source-site outcome model.
        let dgm = DgmSpec::appendix(1).unwrap();
        let spec = InterventionSpec::new(1, 0, 0);
        let psi = true_psi(&dgm, spec);
        let rng = CounterRng::new(20240817);
        let n = 10_000_000u64;
        let mut sum = 0.0;
        let mut kept = 0u64;
        for i in 0..n {
            let base = i * 8;
            let w1 = rng.bernoulli(base, 0.5);
            let w2 = rng.bernoulli(base + 1, dgm.p_w2(w1));
            let s = rng.bernoulli(base + 2, dgm.p_s1(w2));
            if s != 0 {
                continue; // condition on the target site
            }
            kept += 1;
            let z = rng.bernoulli(base + 3, dgm.p_z1(spec.a, w2, 0));
            let g1: f64 = (0..2u8)
                .map(|zz| {
                    let pz = dgm.p_z1(spec.a_star, w2, spec.s_ref);
                    let w = if zz == 1 { pz } else { 1.0 - pz };
                    dgm.p_m1(zz, w2, spec.s_ref) * w
                })
                .sum();
            let m = rng.bernoulli(base + 4, g1);
            sum += dgm.p_y1(m, z, w2);
        }
        let mc = sum / kept as f64;
        // 3 Monte Carlo standard errors with sd <= 0.5.
        let tol = 3.0 * 0.5 / (kept as f64).sqrt();
        assert_abs_diff_eq!(mc, psi, epsilon = tol);
    }
}
