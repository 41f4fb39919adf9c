//! Nuisance model fitting and per-row counterfactual predictions.
//!
//! Fits the five logistic regressions (A | W,S; Z | A,W,S; M | Z,[A,]W,S;
//! S | W; and the outcome regression on source-site rows), evaluates the
//! stochastic intervention density g*, and assembles every probability
//! factor the estimators need.

use crate::data::{Dataset, InterventionSpec, Observation};
use crate::error::EstimationError;
use crate::glm::{build_design, fit_logistic, LogisticFit};
use crate::terms::{Term, TermSpec, Var, Variant};
use std::collections::HashMap;

/// All fitted nuisance models for one dataset and variant.
#[derive(Debug, Clone)]
pub struct NuisanceFits {
    pub variant: Variant,
    pub terms: TermSpec,
    pub fit_a: LogisticFit,
    pub fit_z: LogisticFit,
    pub fit_m: LogisticFit,
    pub fit_s: LogisticFit,
    pub fit_y: LogisticFit,
    /// Weighted sample proportion of target-site rows.
    pub p_s0: f64,
}

/// Fit all nuisance models. The outcome regression uses source-site rows
/// only; every other fit uses all rows. Frequency weights are respected
/// throughout.
pub fn fit_nuisance(
    dataset: &Dataset,
    terms: &TermSpec,
    variant: Variant,
) -> Result<NuisanceFits, EstimationError> {
    terms.validate(variant)?;
    let n = dataset.len();
    let weights = dataset.weights();
    let no_override = HashMap::new();
    let zero_offset = vec![0.0; n];

    let response = |f: &dyn Fn(&Observation) -> f64| -> Vec<f64> {
        dataset.rows().iter().map(f).collect()
    };

    let fit = |term_list: &[Term], y: &[f64], w: &[f64]| -> Result<LogisticFit, EstimationError> {
        let x = build_design(dataset, term_list, &no_override)?;
        Ok(fit_logistic(&x, y, w, &zero_offset)?)
    };

    let fit_a = fit(&terms.a, &response(&|o| f64::from(o.a)), weights)?;
    let fit_z = fit(&terms.z, &response(&|o| f64::from(o.z)), weights)?;
    let fit_m = fit(&terms.m, &response(&|o| f64::from(o.m)), weights)?;
    let fit_s = fit(&terms.s, &response(&|o| f64::from(o.s)), weights)?;

    // Outcome regression on S=1 rows: zero out target-site weights so the
    // design stays row-aligned with the dataset.
    let y_resp: Vec<f64> = dataset
        .rows()
        .iter()
        .map(|o| o.y.map(f64::from).unwrap_or(0.0))
        .collect();
    let y_weights: Vec<f64> = dataset
        .rows()
        .iter()
        .zip(weights)
        .map(|(o, w)| if o.s == 1 { *w } else { 0.0 })
        .collect();
    let observed: Vec<u8> = dataset
        .rows()
        .iter()
        .zip(&y_weights)
        .filter(|(o, w)| o.s == 1 && **w > 0.0)
        .map(|(o, _)| o.y.unwrap())
        .collect();
    if let [first, rest @ ..] = observed.as_slice() {
        if rest.iter().all(|v| v == first) {
            return Err(EstimationError::DegenerateOutcome(*first));
        }
    }
    let fit_y = fit(&terms.y, &y_resp, &y_weights)?;

    let total = dataset.weight_total();
    let p_s0 = dataset
        .rows()
        .iter()
        .zip(weights)
        .filter(|(o, _)| o.s == 0)
        .map(|(_, w)| w)
        .sum::<f64>()
        / total;

    Ok(NuisanceFits {
        variant,
        terms: terms.clone(),
        fit_a,
        fit_z,
        fit_m,
        fit_s,
        fit_y,
        p_s0,
    })
}

fn predict_with(
    fit: &LogisticFit,
    dataset: &Dataset,
    terms: &[Term],
    overrides: &HashMap<Var, u8>,
) -> Result<Vec<f64>, EstimationError> {
    let x = build_design(dataset, terms, overrides)?;
    Ok(fit.predict_prob(&x)?)
}

impl NuisanceFits {
    /// g*(M=1 | w) for a single covariate row: sum over z of the mediator
    /// model at Z=z (and A=a* for the unrestricted variant) times the
    /// intermediate model at A=a*, all at S=s_ref.
    pub fn stochastic_intervention(
        &self,
        obs: &Observation,
        spec: InterventionSpec,
    ) -> Result<f64, EstimationError> {
        let single = Dataset::single_row_view(*obs);
        Ok(self.gstar1(&single, spec)?[0])
    }

    /// Vectorized g*(M=1 | W_i) for every row.
    pub fn gstar1(
        &self,
        dataset: &Dataset,
        spec: InterventionSpec,
    ) -> Result<Vec<f64>, EstimationError> {
        let mut out = vec![0.0; dataset.len()];
        for z in 0..2u8 {
            let mut m_over = HashMap::from([(Var::Z, z), (Var::S, spec.s_ref)]);
            if self.variant == Variant::Unrestricted {
                m_over.insert(Var::A, spec.a_star);
            }
            let pm1 = predict_with(&self.fit_m, dataset, &self.terms.m, &m_over)?;
            let z_over = HashMap::from([(Var::A, spec.a_star), (Var::S, spec.s_ref)]);
            let pz1 = predict_with(&self.fit_z, dataset, &self.terms.z, &z_over)?;
            for i in 0..dataset.len() {
                let pz_at = if z == 1 { pz1[i] } else { 1.0 - pz1[i] };
                out[i] += pm1[i] * pz_at;
            }
        }
        Ok(out)
    }

    /// Marginal p_Z(z | W_i, S=s), summing the intermediate model over the
    /// fitted treatment distribution. Restricted variant only.
    pub fn marginal_z(
        &self,
        dataset: &Dataset,
        z: u8,
        s: u8,
    ) -> Result<Vec<f64>, EstimationError> {
        if self.variant != Variant::Restricted {
            return Err(EstimationError::MarginalZOnUnrestricted);
        }
        let mut out = vec![0.0; dataset.len()];
        for a in 0..2u8 {
            let z_over = HashMap::from([(Var::A, a), (Var::S, s)]);
            let pz1 = predict_with(&self.fit_z, dataset, &self.terms.z, &z_over)?;
            let a_over = HashMap::from([(Var::S, s)]);
            let pa1 = predict_with(&self.fit_a, dataset, &self.terms.a, &a_over)?;
            for i in 0..dataset.len() {
                let pz_at = if z == 1 { pz1[i] } else { 1.0 - pz1[i] };
                let pa_at = if a == 1 { pa1[i] } else { 1.0 - pa1[i] };
                out[i] += pz_at * pa_at;
            }
        }
        Ok(out)
    }
}

/// Per-row evaluation of every factor appearing in the weights, the EIC,
/// and the sequential regressions, for one intervention spec.
#[derive(Debug, Clone)]
pub struct NuisancePredictions {
    pub variant: Variant,
    pub spec: InterventionSpec,
    pub p_s0: f64,
    /// g*(M=1 | W_i).
    pub gstar1: Vec<f64>,
    /// g* at the observed M_i.
    pub gstar_obs: Vec<f64>,
    /// p_Z(Z_i | A=a, W_i, S=0) — the weight numerator factor.
    pub pz_num: Vec<f64>,
    /// p_Z(Z_i | A=a, W_i, S=1) — conditional denominator factor.
    pub pz_den: Vec<f64>,
    /// p_Z(Z_i | W_i, S=1) marginalized over A (restricted variant only).
    pub pz_marg: Option<Vec<f64>>,
    /// p_A(a | W_i, S=1).
    pub pa_s1: Vec<f64>,
    /// p_A(a | W_i, S_i) at the observed site, for the second-level weights.
    pub pa_obs_s: Vec<f64>,
    /// P(S=0 | W_i) and P(S=1 | W_i).
    pub ps0_w: Vec<f64>,
    pub ps1_w: Vec<f64>,
    /// Mediator density at the observed (M_i, Z_i, [A_i,] W_i, S=1).
    pub pm_obs: Vec<f64>,
    /// Outcome regression at the observed row and with M overridden.
    pub qy_obs: Vec<f64>,
    pub qy_m0: Vec<f64>,
    pub qy_m1: Vec<f64>,
}

/// Clamp a probability to [floor, 1-floor]; floor of 0 leaves it unchanged.
#[inline]
fn clip(p: f64, floor: f64) -> f64 {
    if floor > 0.0 {
        p.clamp(floor, 1.0 - floor)
    } else {
        p
    }
}

/// Evaluate every per-row factor for `spec`. `clip_floor` optionally bounds
/// the probabilities used in ratio factors away from 0 and 1 (default 0:
/// no truncation).
pub fn predict_all(
    fits: &NuisanceFits,
    dataset: &Dataset,
    spec: InterventionSpec,
    clip_floor: f64,
) -> Result<NuisancePredictions, EstimationError> {
    predict_all_from(fits, fits, dataset, spec, clip_floor)
}

/// Like [`predict_all`], but evaluates the stochastic intervention density
/// g* from `g_fits` instead of `fits`. The intervention density enters the
/// estimand itself, so the bootstrap evaluates it from the original-sample
/// fits while every other nuisance is refit per resample.
pub fn predict_all_from(
    fits: &NuisanceFits,
    g_fits: &NuisanceFits,
    dataset: &Dataset,
    spec: InterventionSpec,
    clip_floor: f64,
) -> Result<NuisancePredictions, EstimationError> {
    let n = dataset.len();
    let rows = dataset.rows();
    let at = |p1: &[f64], v: u8, i: usize| if v == 1 { p1[i] } else { 1.0 - p1[i] };

    let gstar1 = g_fits.gstar1(dataset, spec)?;
    let gstar_obs: Vec<f64> = (0..n).map(|i| at(&gstar1, rows[i].m, i)).collect();

    let pz1_num = predict_with(
        &fits.fit_z,
        dataset,
        &fits.terms.z,
        &HashMap::from([(Var::A, spec.a), (Var::S, 0)]),
    )?;
    let pz1_den = predict_with(
        &fits.fit_z,
        dataset,
        &fits.terms.z,
        &HashMap::from([(Var::A, spec.a), (Var::S, 1)]),
    )?;
    let pz_num: Vec<f64> = (0..n).map(|i| clip(at(&pz1_num, rows[i].z, i), clip_floor)).collect();
    let pz_den: Vec<f64> = (0..n).map(|i| clip(at(&pz1_den, rows[i].z, i), clip_floor)).collect();

    let pz_marg = match fits.variant {
        Variant::Restricted => {
            let pz0 = fits.marginal_z(dataset, 0, 1)?;
            let pz1 = fits.marginal_z(dataset, 1, 1)?;
            Some(
                (0..n)
                    .map(|i| {
                        clip(if rows[i].z == 1 { pz1[i] } else { pz0[i] }, clip_floor)
                    })
                    .collect(),
            )
        }
        Variant::Unrestricted => None,
    };

    let pa1_s1 = predict_with(
        &fits.fit_a,
        dataset,
        &fits.terms.a,
        &HashMap::from([(Var::S, 1)]),
    )?;
    let pa1_obs = predict_with(&fits.fit_a, dataset, &fits.terms.a, &HashMap::new())?;
    let pa_s1: Vec<f64> = (0..n).map(|i| clip(at(&pa1_s1, spec.a, i), clip_floor)).collect();
    let pa_obs_s: Vec<f64> = (0..n).map(|i| clip(at(&pa1_obs, spec.a, i), clip_floor)).collect();

    let ps1 = predict_with(&fits.fit_s, dataset, &fits.terms.s, &HashMap::new())?;
    let ps0_w: Vec<f64> = (0..n).map(|i| clip(1.0 - ps1[i], clip_floor)).collect();
    let ps1_w: Vec<f64> = (0..n).map(|i| clip(ps1[i], clip_floor)).collect();

    let mut m_over = HashMap::from([(Var::S, 1)]);
    if fits.variant == Variant::Unrestricted {
        // Observed A stays in place for the unrestricted mediator density.
        m_over.remove(&Var::A);
    }
    let pm1 = predict_with(&fits.fit_m, dataset, &fits.terms.m, &m_over)?;
    let pm_obs: Vec<f64> = (0..n).map(|i| clip(at(&pm1, rows[i].m, i), clip_floor)).collect();

    let qy_m0 = predict_with(
        &fits.fit_y,
        dataset,
        &fits.terms.y,
        &HashMap::from([(Var::M, 0)]),
    )?;
    let qy_m1 = predict_with(
        &fits.fit_y,
        dataset,
        &fits.terms.y,
        &HashMap::from([(Var::M, 1)]),
    )?;
    let qy_obs: Vec<f64> = (0..n)
        .map(|i| if rows[i].m == 1 { qy_m1[i] } else { qy_m0[i] })
        .collect();

    Ok(NuisancePredictions {
        variant: fits.variant,
        spec,
        p_s0: fits.p_s0,
        gstar1,
        gstar_obs,
        pz_num,
        pz_den,
        pz_marg,
        pa_s1,
        pa_obs_s,
        ps0_w,
        ps1_w,
        pm_obs,
        qy_obs,
        qy_m0,
        qy_m1,
    })
}

impl Dataset {
    /// A one-row dataset for single-observation prediction. Bypasses the
    /// usual both-sites invariant; only used for model evaluation.
    fn single_row_view(obs: Observation) -> Dataset {
        let mut other = obs;
        other.s = 1 - obs.s;
        other.y = if other.s == 1 { Some(0) } else { None };
        // The second row carries zero weight and exists only to satisfy
        // construction invariants; predictions index row 0.
        Dataset::with_weights(vec![obs, other], vec![1.0, 0.0]).expect("valid single-row view")
    }
}

/// Build NuisancePredictions directly from a DGM's true conditional
/// probabilities, bypassing fitting. Used by oracle tests and available for
/// diagnostics.
pub fn oracle_predictions(
    dgm: &crate::dgp::DgmSpec,
    dataset: &Dataset,
    spec: InterventionSpec,
    variant: Variant,
) -> NuisancePredictions {
    let n = dataset.len();
    let rows = dataset.rows();
    let bit = |p1: f64, v: u8| if v == 1 { p1 } else { 1.0 - p1 };
    let gstar1: Vec<f64> = rows
        .iter()
        .map(|o| {
            (0..2u8)
                .map(|z| {
                    bit(dgm.p_z1(spec.a_star, o.w2, spec.s_ref), z)
                        * dgm.p_m1(z, o.w2, spec.s_ref)
                })
                .sum()
        })
        .collect();
    let p_s0 = crate::truth::true_p_s0(dgm);
    NuisancePredictions {
        variant,
        spec,
        p_s0,
        gstar_obs: rows.iter().zip(&gstar1).map(|(o, g)| bit(*g, o.m)).collect(),
        pz_num: rows.iter().map(|o| bit(dgm.p_z1(spec.a, o.w2, 0), o.z)).collect(),
        pz_den: rows.iter().map(|o| bit(dgm.p_z1(spec.a, o.w2, 1), o.z)).collect(),
        pz_marg: Some(
            rows.iter()
                .map(|o| {
                    0.5 * bit(dgm.p_z1(0, o.w2, 1), o.z) + 0.5 * bit(dgm.p_z1(1, o.w2, 1), o.z)
                })
                .collect(),
        ),
        pa_s1: vec![0.5; n],
        pa_obs_s: vec![0.5; n],
        ps0_w: rows.iter().map(|o| 1.0 - dgm.p_s1(o.w2)).collect(),
        ps1_w: rows.iter().map(|o| dgm.p_s1(o.w2)).collect(),
        pm_obs: rows.iter().map(|o| bit(dgm.p_m1(o.z, o.w2, 1), o.m)).collect(),
        qy_obs: rows.iter().map(|o| dgm.p_y1(o.m, o.z, o.w2)).collect(),
        qy_m0: rows.iter().map(|o| dgm.p_y1(0, o.z, o.w2)).collect(),
        qy_m1: rows.iter().map(|o| dgm.p_y1(1, o.z, o.w2)).collect(),
        gstar1,
    }
}
