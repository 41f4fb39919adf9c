//! Point estimators for ψ(a, a*): stabilized IPTW, one-step
//! estimating-equation (EE), and TMLE, each in restricted ("efficient")
//! and unrestricted ("general") form, plus SDE/SIE contrasts and
//! influence-curve / bootstrap standard errors.

use crate::data::{Dataset, InterventionSpec};
use crate::error::EstimationError;
use crate::glm::{expit, fit_logistic, logit, DesignMatrix};
use crate::nuisance::{fit_nuisance, predict_all_from, NuisanceFits, NuisancePredictions};
use crate::rng::CounterRng;
use crate::terms::{Term, TermSpec, Var, Variant};
use crate::truth::Contrast;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    Iptw,
    EeEff,
    EeGen,
    TmleEff,
    TmleGen,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 5] = [
        EstimatorId::Iptw,
        EstimatorId::EeEff,
        EstimatorId::EeGen,
        EstimatorId::TmleEff,
        EstimatorId::TmleGen,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorId::Iptw => "iptw",
            EstimatorId::EeEff => "ee_eff",
            EstimatorId::EeGen => "ee_gen",
            EstimatorId::TmleEff => "tmle_eff",
            EstimatorId::TmleGen => "tmle_gen",
        }
    }

    pub fn parse(s: &str) -> Option<EstimatorId> {
        EstimatorId::ALL.into_iter().find(|e| e.label() == s)
    }

    /// Which nuisance variant the estimator consumes. IPTW uses the
    /// restricted mediator model (its weights carry the conditional Z
    /// density and p_A regardless).
    pub fn variant(self) -> Variant {
        match self {
            EstimatorId::Iptw | EstimatorId::EeEff | EstimatorId::TmleEff => Variant::Restricted,
            EstimatorId::EeGen | EstimatorId::TmleGen => Variant::Unrestricted,
        }
    }
}

/// Fit diagnostics attached to every estimate. The component score means
/// are the weighted empirical means of D_Y, D_Z, D_W at the returned ψ.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub eps_y: Option<f64>,
    pub eps_z: Option<f64>,
    /// Plug-in ψ⁰ before the one-step / fluctuation correction.
    pub psi_plugin: Option<f64>,
    pub mean_dy: f64,
    pub mean_dz: f64,
    pub mean_dw: f64,
    pub mean_eic: f64,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub estimator: EstimatorId,
    pub variant: Variant,
    pub spec: InterventionSpec,
    pub psi: f64,
    pub ic: Vec<f64>,
    pub se_ic: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub effect: Contrast,
    pub estimate: f64,
    pub ic: Vec<f64>,
    pub se_ic: f64,
    pub se_boot: Option<f64>,
    pub ci_ic: (f64, f64),
    pub ci_boot: Option<(f64, f64)>,
}

impl EffectEstimate {
    pub fn set_boot_se(&mut self, se: f64) {
        self.se_boot = Some(se);
        self.ci_boot = Some(wald(self.estimate, se));
    }
}

fn wald(est: f64, se: f64) -> (f64, f64) {
    (est - 1.96 * se, est + 1.96 * se)
}

fn wmean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

/// SE of a mean from per-row IC values: sd(ic)/√n with frequency weights
/// (n is the total weight).
fn ic_se(ic: &[f64], weights: &[f64]) -> f64 {
    let n: f64 = weights.iter().sum();
    let mean = wmean(ic, weights);
    let var = ic
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    (var / n).sqrt()
}

fn check_positive(
    value: f64,
    row: usize,
    factor: &'static str,
) -> Result<f64, EstimationError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(EstimationError::Positivity { row, factor })
    }
}

/// Inverse-probability weight H per row: the transport/mediation weight
/// with indicator I(S=1, A=a), conditional Z density and p_A in the
/// denominator. Zero wherever the indicator is zero.
pub fn iptw_weights(
    dataset: &Dataset,
    preds: &NuisancePredictions,
) -> Result<Vec<f64>, EstimationError> {
    let a = preds.spec.a;
    dataset
        .rows()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            if o.s != 1 || o.a != a {
                return Ok(0.0);
            }
            let den = check_positive(preds.pm_obs[i], i, "p_M")?
                * check_positive(preds.pz_den[i], i, "p_Z(S=1)")?
                * check_positive(preds.pa_s1[i], i, "p_A")?
                * check_positive(preds.ps1_w[i], i, "p_S(S=1|W)")?
                * check_positive(preds.p_s0, i, "P(S=0)")?;
            Ok(preds.gstar_obs[i] * preds.pz_num[i] * preds.ps0_w[i] / den)
        })
        .collect()
}

/// The weight multiplying the outcome residual in D_Y. Restricted: I(S=1)
/// with the marginal Z density and no p_A; unrestricted: identical to the
/// IPTW weight.
fn dy_weights(
    dataset: &Dataset,
    preds: &NuisancePredictions,
) -> Result<Vec<f64>, EstimationError> {
    match preds.variant {
        Variant::Unrestricted => iptw_weights(dataset, preds),
        Variant::Restricted => {
            let pz_marg = preds.pz_marg.as_ref().expect("restricted predictions carry pz_marg");
            dataset
                .rows()
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    if o.s != 1 {
                        return Ok(0.0);
                    }
                    let den = check_positive(preds.pm_obs[i], i, "p_M")?
                        * check_positive(pz_marg[i], i, "marginal p_Z")?
                        * check_positive(preds.ps1_w[i], i, "p_S(S=1|W)")?
                        * check_positive(preds.p_s0, i, "P(S=0)")?;
                    Ok(preds.gstar_obs[i] * preds.pz_num[i] * preds.ps0_w[i] / den)
                })
                .collect()
        }
    }
}

/// The weight on the (Q̄_M − Q̄_Z) residual: I(S=0, A=a)/(p_A · P(S=0)).
fn dz_weights(
    dataset: &Dataset,
    preds: &NuisancePredictions,
) -> Result<Vec<f64>, EstimationError> {
    let a = preds.spec.a;
    dataset
        .rows()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            if o.s != 0 || o.a != a {
                return Ok(0.0);
            }
            let den = check_positive(preds.pa_obs_s[i], i, "p_A")?
                * check_positive(preds.p_s0, i, "P(S=0)")?;
            Ok(1.0 / den)
        })
        .collect()
}

fn outcome_values(dataset: &Dataset) -> Vec<f64> {
    dataset
        .rows()
        .iter()
        .map(|o| o.y.map(f64::from).unwrap_or(0.0))
        .collect()
}

pub fn estimate_iptw(
    dataset: &Dataset,
    preds: &NuisancePredictions,
) -> Result<EstimateResult, EstimationError> {
    let h = iptw_weights(dataset, preds)?;
    let w = dataset.weights();
    let y = outcome_values(dataset);
    let total_h: f64 = h.iter().zip(w).map(|(h, w)| h * w).sum();
    if total_h <= 0.0 {
        return Err(EstimationError::NoEffectiveObservations);
    }
    let psi = h
        .iter()
        .zip(&y)
        .zip(w)
        .map(|((h, y), w)| w * h * y)
        .sum::<f64>()
        / total_h;
    let mean_h = total_h / dataset.weight_total();
    let ic: Vec<f64> = h
        .iter()
        .zip(&y)
        .map(|(h, y)| h / mean_h * (y - psi))
        .collect();
    let diagnostics = Diagnostics { mean_eic: wmean(&ic, w), ..Default::default() };
    Ok(EstimateResult {
        estimator: EstimatorId::Iptw,
        variant: preds.variant,
        spec: preds.spec,
        psi,
        se_ic: ic_se(&ic, w),
        ic,
        diagnostics,
    })
}

/// Q̄_M(Z, W, S): the outcome regression marginalized over ĝ*.
fn qbar_m(preds: &NuisancePredictions, qy_m0: &[f64], qy_m1: &[f64]) -> Vec<f64> {
    preds
        .gstar1
        .iter()
        .zip(qy_m0.iter().zip(qy_m1))
        .map(|(g, (q0, q1))| q0 * (1.0 - g) + q1 * g)
        .collect()
}

/// The main-effects design for the Q̄_Z regression of Q̄_M on A, W, and S.
// Saturated in (A, W1, W2, S): a main-effects-only working model leaves the
// sequential regression inconsistent, which shows up as inflated indirect-
// effect variance even though the point estimate stays consistent.
const QZ_TERMS: [&[Var]; 15] = [
    &[Var::A],
    &[Var::W1],
    &[Var::W2],
    &[Var::S],
    &[Var::A, Var::W1],
    &[Var::A, Var::W2],
    &[Var::A, Var::S],
    &[Var::W1, Var::W2],
    &[Var::W1, Var::S],
    &[Var::W2, Var::S],
    &[Var::A, Var::W1, Var::W2],
    &[Var::A, Var::W1, Var::S],
    &[Var::A, Var::W2, Var::S],
    &[Var::W1, Var::W2, Var::S],
    &[Var::A, Var::W1, Var::W2, Var::S],
];

/// Regress `qm` on A, W, S with a fractional logistic model and predict at
/// A = a.
fn regress_qz(
    dataset: &Dataset,
    qm: &[f64],
    a: u8,
) -> Result<Vec<f64>, EstimationError> {
    let terms: Vec<Term> = QZ_TERMS.iter().map(|t| t.to_vec()).collect();
    let x = crate::glm::build_design(dataset, &terms, &std::collections::HashMap::new())?;
    let zero = vec![0.0; dataset.len()];
    let fit = fit_logistic(&x, qm, dataset.weights(), &zero)?;
    let x_a = crate::glm::build_design(
        dataset,
        &terms,
        &std::collections::HashMap::from([(Var::A, a)]),
    )?;
    Ok(fit.predict_prob(&x_a)?)
}

/// Per-row EIC components at the supplied sequential-regression values and
/// ψ. `dy_w` and `dz_w` are the precomputed indicator weights.
#[allow(clippy::too_many_arguments)]
fn eic_rows(
    dataset: &Dataset,
    preds: &NuisancePredictions,
    dy_w: &[f64],
    dz_w: &[f64],
    qy_obs: &[f64],
    qm: &[f64],
    qz: &[f64],
    psi: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let y = outcome_values(dataset);
    let n = dataset.len();
    let dy: Vec<f64> = (0..n).map(|i| dy_w[i] * (y[i] - qy_obs[i])).collect();
    let dz: Vec<f64> = (0..n).map(|i| dz_w[i] * (qm[i] - qz[i])).collect();
    let dw: Vec<f64> = dataset
        .rows()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            if o.s == 0 {
                (qz[i] - psi) / preds.p_s0
            } else {
                0.0
            }
        })
        .collect();
    (dy, dz, dw)
}

/// Per-row (D_Y, D_Z, D_W) at ψ, with the sequential regressions computed
/// from the initial outcome fit.
pub fn eic_components(
    dataset: &Dataset,
    preds: &NuisancePredictions,
    psi: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), EstimationError> {
    let dy_w = dy_weights(dataset, preds)?;
    let dz_w = dz_weights(dataset, preds)?;
    let qm = qbar_m(preds, &preds.qy_m0, &preds.qy_m1);
    let qz = regress_qz(dataset, &qm, preds.spec.a)?;
    Ok(eic_rows(dataset, preds, &dy_w, &dz_w, &preds.qy_obs, &qm, &qz, psi))
}

/// Weighted mean of `values` over target-site rows.
fn s0_mean(dataset: &Dataset, values: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((o, w), v) in dataset.rows().iter().zip(dataset.weights()).zip(values) {
        if o.s == 0 {
            num += w * v;
            den += w;
        }
    }
    num / den
}

/// One-step EE estimator: plug-in ψ⁰ plus the empirical mean of the EIC at
/// ψ⁰. The EIC is affine in ψ, so this solves the estimating equation in
/// closed form when P(S=0) is the empirical proportion.
pub fn estimate_ee(
    dataset: &Dataset,
    preds: &NuisancePredictions,
    id: EstimatorId,
) -> Result<EstimateResult, EstimationError> {
    let w = dataset.weights();
    let dy_w = dy_weights(dataset, preds)?;
    let dz_w = dz_weights(dataset, preds)?;
    let qm = qbar_m(preds, &preds.qy_m0, &preds.qy_m1);
    let qz = regress_qz(dataset, &qm, preds.spec.a)?;
    let psi0 = s0_mean(dataset, &qz);
    let (dy, dz, dw0) = eic_rows(dataset, preds, &dy_w, &dz_w, &preds.qy_obs, &qm, &qz, psi0);
    let step: Vec<f64> = (0..dataset.len()).map(|i| dy[i] + dz[i] + dw0[i]).collect();
    let psi = psi0 + wmean(&step, w);
    let (dy, dz, dw) = eic_rows(dataset, preds, &dy_w, &dz_w, &preds.qy_obs, &qm, &qz, psi);
    let ic: Vec<f64> = (0..dataset.len()).map(|i| dy[i] + dz[i] + dw[i]).collect();
    let diagnostics = Diagnostics {
        psi_plugin: Some(psi0),
        mean_dy: wmean(&dy, w),
        mean_dz: wmean(&dz, w),
        mean_dw: wmean(&dw, w),
        mean_eic: wmean(&ic, w),
        ..Default::default()
    };
    Ok(EstimateResult {
        estimator: id,
        variant: preds.variant,
        spec: preds.spec,
        psi,
        se_ic: ic_se(&ic, w),
        ic,
        diagnostics,
    })
}

/// Safe logit for fitted probabilities: fitted values can round to exactly
/// 0 or 1 under saturation.
fn offset_logit(p: f64) -> f64 {
    logit(p.clamp(1e-12, 1.0 - 1e-12))
}

/// Intercept-only weighted logistic fluctuation: response on the offset
/// with the given weights. Returns ε.
fn fluctuate(
    dataset: &Dataset,
    response: &[f64],
    fluct_weights: &[f64],
    offset: &[f64],
    level: &'static str,
) -> Result<f64, EstimationError> {
    let n = dataset.len();
    let weights: Vec<f64> = dataset
        .weights()
        .iter()
        .zip(fluct_weights)
        .map(|(w, h)| w * h)
        .collect();
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(EstimationError::NoEffectiveObservations);
    }
    let x = DesignMatrix::from_rows(vec![vec![1.0]; n], vec!["(Intercept)".into()])?;
    let fit = fit_logistic(&x, response, &weights, offset)?;
    if !fit.converged {
        return Err(EstimationError::FluctuationDiverged(format!(
            "{level} fluctuation stopped after {} iterations (deviance {:.6e})",
            fit.iterations, fit.deviance
        )));
    }
    Ok(fit.coefficients[0])
}

/// TMLE: a level-1 fluctuation of the outcome regression under the
/// transport weights, marginalization over ĝ*, a level-2 fluctuation of
/// the intermediate regression, then the target-site mean of the updated
/// Q̄*_Z. The result is a substitution estimator, so ψ ∈ [0,1].
pub fn estimate_tmle(
    dataset: &Dataset,
    preds: &NuisancePredictions,
    id: EstimatorId,
) -> Result<EstimateResult, EstimationError> {
    let n = dataset.len();
    let w = dataset.weights();
    let y = outcome_values(dataset);

    let h = dy_weights(dataset, preds)?;
    let offset_y: Vec<f64> = preds.qy_obs.iter().map(|q| offset_logit(*q)).collect();
    let eps_y = fluctuate(dataset, &y, &h, &offset_y, "outcome")?;
    let update = |q: &[f64]| -> Vec<f64> {
        q.iter().map(|q| expit(offset_logit(*q) + eps_y)).collect()
    };
    let qy_obs = update(&preds.qy_obs);
    let qy_m0 = update(&preds.qy_m0);
    let qy_m1 = update(&preds.qy_m1);

    let qm = qbar_m(preds, &qy_m0, &qy_m1);
    let qz0 = regress_qz(dataset, &qm, preds.spec.a)?;
    let h_a = dz_weights(dataset, preds)?;
    let offset_z: Vec<f64> = qz0.iter().map(|q| offset_logit(*q)).collect();
    let eps_z = fluctuate(dataset, &qm, &h_a, &offset_z, "intermediate")?;
    let qz: Vec<f64> = offset_z.iter().map(|o| expit(o + eps_z)).collect();

    let psi = s0_mean(dataset, &qz);
    let (dy, dz, dw) = eic_rows(dataset, preds, &h, &h_a, &qy_obs, &qm, &qz, psi);
    let ic: Vec<f64> = (0..n).map(|i| dy[i] + dz[i] + dw[i]).collect();
    let diagnostics = Diagnostics {
        eps_y: Some(eps_y),
        eps_z: Some(eps_z),
        psi_plugin: Some(s0_mean(dataset, &qz0)),
        mean_dy: wmean(&dy, w),
        mean_dz: wmean(&dz, w),
        mean_dw: wmean(&dw, w),
        mean_eic: wmean(&ic, w),
    };
    Ok(EstimateResult {
        estimator: id,
        variant: preds.variant,
        spec: preds.spec,
        psi,
        se_ic: ic_se(&ic, w),
        ic,
        diagnostics,
    })
}

pub fn estimate(
    dataset: &Dataset,
    preds: &NuisancePredictions,
    id: EstimatorId,
) -> Result<EstimateResult, EstimationError> {
    match id {
        EstimatorId::Iptw => estimate_iptw(dataset, preds),
        EstimatorId::EeEff | EstimatorId::EeGen => estimate_ee(dataset, preds, id),
        EstimatorId::TmleEff | EstimatorId::TmleGen => estimate_tmle(dataset, preds, id),
    }
}

/// SDE and SIE from the three component estimates ψ(1,0), ψ(0,0), ψ(1,1).
pub fn effects(
    dataset: &Dataset,
    psi_10: &EstimateResult,
    psi_00: &EstimateResult,
    psi_11: &EstimateResult,
) -> Result<(EffectEstimate, EffectEstimate), EstimationError> {
    for other in [psi_00, psi_11] {
        if other.estimator != psi_10.estimator {
            return Err(EstimationError::MismatchedComponents(
                psi_10.estimator.label().to_string(),
                other.estimator.label().to_string(),
            ));
        }
    }
    let contrast = |hi: &EstimateResult, lo: &EstimateResult, effect: Contrast| {
        let estimate = hi.psi - lo.psi;
        let ic: Vec<f64> = hi.ic.iter().zip(&lo.ic).map(|(a, b)| a - b).collect();
        let se_ic = ic_se(&ic, dataset.weights());
        EffectEstimate {
            effect,
            estimate,
            ic,
            se_ic,
            se_boot: None,
            ci_ic: wald(estimate, se_ic),
            ci_boot: None,
        }
    };
    Ok((
        contrast(psi_10, psi_00, Contrast::Sde),
        contrast(psi_11, psi_10, Contrast::Sie),
    ))
}

/// Which models to use, which estimators to run, and estimation options.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub terms_restricted: TermSpec,
    pub terms_unrestricted: TermSpec,
    pub estimators: Vec<EstimatorId>,
    pub s_ref: u8,
    pub clip: f64,
}

/// One estimator's full output on a dataset: the three component ψ values
/// and both effect contrasts.
#[derive(Debug, Clone)]
pub struct EstimatorEffects {
    pub estimator: EstimatorId,
    pub components: [EstimateResult; 3],
    pub sde: EffectEstimate,
    pub sie: EffectEstimate,
}

/// Results of [`analyze_full`]: every estimator's effects plus the fitted
/// nuisance models for each variant that was needed.
#[derive(Debug)]
pub struct Analysis {
    pub effects: Vec<EstimatorEffects>,
    /// Indexed by [`variant_slot`]; `None` if no estimator used the variant.
    pub fits: [Option<NuisanceFits>; 2],
}

impl Analysis {
    pub fn fits_for(&self, variant: Variant) -> Option<&NuisanceFits> {
        self.fits[variant_slot(variant)].as_ref()
    }
}

pub(crate) fn variant_slot(v: Variant) -> usize {
    match v {
        Variant::Restricted => 0,
        Variant::Unrestricted => 1,
    }
}

/// Fit nuisances (once per variant) and run every configured estimator on
/// the three intervention specs.
pub fn analyze(
    dataset: &Dataset,
    cfg: &AnalysisConfig,
) -> Result<Vec<EstimatorEffects>, EstimationError> {
    analyze_full(dataset, cfg).map(|a| a.effects)
}

/// [`analyze`], but also returning the per-variant nuisance fits.
pub fn analyze_full(
    dataset: &Dataset,
    cfg: &AnalysisConfig,
) -> Result<Analysis, EstimationError> {
    analyze_impl(dataset, cfg, None)
}

/// `g_source`, when given, supplies the stochastic-intervention fits
/// (bootstrap resamples keep g* at the original-sample fit).
fn analyze_impl(
    dataset: &Dataset,
    cfg: &AnalysisConfig,
    g_source: Option<&Analysis>,
) -> Result<Analysis, EstimationError> {
    let specs = InterventionSpec::effect_triple(cfg.s_ref);
    let mut per_variant: [Option<[NuisancePredictions; 3]>; 2] = [None, None];
    let mut all_fits: [Option<NuisanceFits>; 2] = [None, None];
    for variant in [Variant::Restricted, Variant::Unrestricted] {
        if !cfg.estimators.iter().any(|e| e.variant() == variant) {
            continue;
        }
        let terms = match variant {
            Variant::Restricted => &cfg.terms_restricted,
            Variant::Unrestricted => &cfg.terms_unrestricted,
        };
        let fits = fit_nuisance(dataset, terms, variant)?;
        let g_fits = g_source.and_then(|a| a.fits_for(variant)).unwrap_or(&fits);
        let p = specs
            .map(|spec| predict_all_from(&fits, g_fits, dataset, spec, cfg.clip));
        let [p0, p1, p2] = p;
        per_variant[variant_slot(variant)] = Some([p0?, p1?, p2?]);
        all_fits[variant_slot(variant)] = Some(fits);
    }

    let effects_out = cfg
        .estimators
        .iter()
        .map(|&id| {
            let preds = per_variant[variant_slot(id.variant())]
                .as_ref()
                .expect("predictions prepared for every requested variant");
            let results = [
                estimate(dataset, &preds[0], id)?,
                estimate(dataset, &preds[1], id)?,
                estimate(dataset, &preds[2], id)?,
            ];
            let (sde, sie) = effects(dataset, &results[0], &results[1], &results[2])?;
            Ok(EstimatorEffects { estimator: id, components: results, sde, sie })
        })
        .collect::<Result<Vec<_>, EstimationError>>()?;
    Ok(Analysis { effects: effects_out, fits: all_fits })
}

/// Bootstrap SEs for SDE and SIE from one estimator's resampling
/// distribution.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    pub estimator: EstimatorId,
    pub se_sde: f64,
    pub se_sie: f64,
    pub failed: usize,
    pub total: usize,
}

/// Nonparametric bootstrap: `b` row resamples, refitting every nuisance
/// model per resample except the stochastic-intervention density, which
/// stays at `base`'s fit (g* defines the target parameter, so it does not
/// vary across resamples). Resamples whose fits fail are dropped and
/// counted; more than 20% failures is an error.
pub fn bootstrap_se(
    dataset: &Dataset,
    cfg: &AnalysisConfig,
    base: &Analysis,
    b: usize,
    rng: &CounterRng,
) -> Result<Vec<BootstrapSummary>, EstimationError> {
    let n = dataset.len();
    let mut draws: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(b); cfg.estimators.len()];
    let mut failed = 0usize;
    for rep in 0..b {
        let sub = rng.stream(rep as u64);
        let indices: Vec<usize> = (0..n).map(|i| sub.index(i as u64, n)).collect();
        let resampled = dataset.resample(&indices)?;
        match analyze_impl(&resampled, cfg, Some(base)) {
            Ok(results) => {
                for (k, r) in results.effects.iter().enumerate() {
                    draws[k].push((r.sde.estimate, r.sie.estimate));
                }
            }
            Err(_) => failed += 1,
        }
    }
    if failed * 5 > b {
        return Err(EstimationError::BootstrapFailed { failed, total: b });
    }
    let sd = |xs: &[f64]| -> f64 {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
    };
    Ok(cfg
        .estimators
        .iter()
        .zip(&draws)
        .map(|(&estimator, pairs)| {
            let sdes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let sies: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            BootstrapSummary {
                estimator,
                se_sde: sd(&sdes),
                se_sie: sd(&sies),
                failed,
                total: b,
            }
        })
        .collect())
}

/// Convenience: analyze plus bootstrap, folding the bootstrap SEs into the
/// effect estimates.
pub fn analyze_with_bootstrap(
    dataset: &Dataset,
    cfg: &AnalysisConfig,
    b: usize,
    rng: &CounterRng,
) -> Result<Analysis, EstimationError> {
    let mut analysis = analyze_full(dataset, cfg)?;
    if b >= 2 {
        let boot = bootstrap_se(dataset, cfg, &analysis, b, &rng.stream(0xB00))?;
        for (r, s) in analysis.effects.iter_mut().zip(&boot) {
            r.sde.set_boot_se(s.se_sde);
            r.sie.set_boot_se(s.se_sie);
        }
    }
    Ok(analysis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use crate::dgp::DgmSpec;
    use crate::truth::true_psi;
    use approx::assert_abs_diff_eq;

    fn constant_preds(n: usize, spec: InterventionSpec) -> NuisancePredictions {
        NuisancePredictions {
            variant: Variant::Restricted,
            spec,
            p_s0: 0.5,
            gstar1: vec![0.5; n],
            gstar_obs: vec![0.5; n],
            pz_num: vec![0.5; n],
            pz_den: vec![0.5; n],
            pz_marg: Some(vec![0.5; n]),
            pa_s1: vec![0.5; n],
            pa_obs_s: vec![0.5; n],
            ps0_w: vec![0.5; n],
            ps1_w: vec![0.5; n],
            pm_obs: vec![0.5; n],
            qy_obs: vec![0.5; n],
            qy_m0: vec![0.5; n],
            qy_m1: vec![0.5; n],
        }
    }

    fn toy_rows() -> Vec<Observation> {
        vec![
            Observation { s: 1, w1: 0, w2: 0, a: 1, z: 0, m: 0, y: Some(1) },
            Observation { s: 1, w1: 1, w2: 0, a: 1, z: 1, m: 1, y: Some(0) },
            Observation { s: 1, w1: 0, w2: 1, a: 0, z: 0, m: 0, y: Some(1) },
            Observation { s: 0, w1: 0, w2: 0, a: 1, z: 0, m: 1, y: None },
            Observation { s: 0, w1: 1, w2: 1, a: 0, z: 1, m: 0, y: None },
        ]
    }

    #[test]
    fn iptw_with_equal_weights_is_the_s1_arm_mean() {
        let ds = Dataset::new(toy_rows()).unwrap();
        let spec = InterventionSpec::new(1, 0, 0);
        let preds = constant_preds(ds.len(), spec);
        let res = estimate_iptw(&ds, &preds).unwrap();
        // rows 0 and 1 have S=1, A=1 with Y = 1, 0.
        assert_abs_diff_eq!(res.psi, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn iptw_is_invariant_to_weight_scale() {
        let ds = Dataset::new(toy_rows()).unwrap();
        let spec = InterventionSpec::new(1, 0, 0);
        let mut preds = constant_preds(ds.len(), spec);
        let base = estimate_iptw(&ds, &preds).unwrap();
        // Scaling every numerator factor scales H by c without touching the
        // estimate or the influence curve.
        preds.gstar_obs.iter_mut().for_each(|g| *g *= 1.7);
        let scaled = estimate_iptw(&ds, &preds).unwrap();
        assert_abs_diff_eq!(base.psi, scaled.psi, epsilon = 1e-12);
        for (a, b) in base.ic.iter().zip(&scaled.ic) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn iptw_errors_without_effective_observations() {
        let rows = vec![
            Observation { s: 1, w1: 0, w2: 0, a: 0, z: 0, m: 0, y: Some(1) },
            Observation { s: 0, w1: 0, w2: 0, a: 1, z: 0, m: 1, y: None },
        ];
        let ds = Dataset::new(rows).unwrap();
        let preds = constant_preds(2, InterventionSpec::new(1, 0, 0));
        assert!(matches!(
            estimate_iptw(&ds, &preds),
            Err(EstimationError::NoEffectiveObservations)
        ));
    }

    #[test]
    fn positivity_error_names_the_offending_row() {
        let ds = Dataset::new(toy_rows()).unwrap();
        let mut preds = constant_preds(ds.len(), InterventionSpec::new(1, 0, 0));
        preds.pm_obs[1] = 0.0;
        match iptw_weights(&ds, &preds) {
            Err(EstimationError::Positivity { row, factor }) => {
                assert_eq!(row, 1);
                assert_eq!(factor, "p_M");
            }
            other => panic!("expected positivity error, got {other:?}"),
        }
    }

    #[test]
    fn effect_arithmetic() {
        let ds = Dataset::new(toy_rows()).unwrap();
        let mk = |psi: f64, spec: InterventionSpec| EstimateResult {
            estimator: EstimatorId::Iptw,
            variant: Variant::Restricted,
            spec,
            psi,
            ic: vec![0.0; ds.len()],
            se_ic: 0.0,
            diagnostics: Diagnostics::default(),
        };
        let [s10, s00, s11] = InterventionSpec::effect_triple(0);
        let (sde, sie) =
            effects(&ds, &mk(0.5, s10), &mk(0.3, s00), &mk(0.6, s11)).unwrap();
        assert_abs_diff_eq!(sde.estimate, 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(sie.estimate, 0.1, epsilon = 1e-14);

        let wrong = EstimateResult { estimator: EstimatorId::EeEff, ..mk(0.3, s00) };
        assert!(matches!(
            effects(&ds, &mk(0.5, s10), &wrong, &mk(0.6, s11)),
            Err(EstimationError::MismatchedComponents(_, _))
        ));
    }

    fn correct_config(dgm: &DgmSpec) -> AnalysisConfig {
        AnalysisConfig {
            terms_restricted: dgm.correct_terms(Variant::Restricted),
            terms_unrestricted: dgm.correct_terms(Variant::Unrestricted),
            estimators: EstimatorId::ALL.to_vec(),
            s_ref: 0,
            clip: 0.0,
        }
    }

    #[test]
    fn all_estimators_recover_truth_on_the_exact_distribution() {
        for id in 1..=3u8 {
            let dgm = DgmSpec::appendix(id).unwrap();
            let ds = dgm.exact_dataset();
            let results = analyze(&ds, &correct_config(&dgm)).unwrap();
            for r in &results {
                for (res, spec) in r.components.iter().zip(InterventionSpec::effect_triple(0)) {
                    let truth = true_psi(&dgm, spec);
                    assert_abs_diff_eq!(res.psi, truth, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn ee_one_step_identity_and_tmle_scores() {
        let dgm = DgmSpec::appendix(2).unwrap();
        let ds = dgm.sample(2000, CounterRng::new(11)).unwrap();
        let results = analyze(&ds, &correct_config(&dgm)).unwrap();
        for r in &results {
            for res in &r.components {
                let d = &res.diagnostics;
                match r.estimator {
                    EstimatorId::EeEff | EstimatorId::EeGen => {
                        // ψ − ψ⁰ = mean(D_Y + D_Z), and the EIC mean at ψ
                        // vanishes by construction.
                        let psi0 = d.psi_plugin.unwrap();
                        assert_abs_diff_eq!(
                            res.psi - psi0,
                            d.mean_dy + d.mean_dz,
                            epsilon = 1e-12
                        );
                        assert!(d.mean_eic.abs() <= 1e-12, "EE mean EIC {}", d.mean_eic);
                    }
                    EstimatorId::TmleEff | EstimatorId::TmleGen => {
                        assert!(d.mean_dy.abs() <= 1e-8, "mean D_Y {}", d.mean_dy);
                        assert!(d.mean_dz.abs() <= 1e-8, "mean D_Z {}", d.mean_dz);
                        assert!(d.mean_dw.abs() <= 1e-12, "mean D_W {}", d.mean_dw);
                        assert!((0.0..=1.0).contains(&res.psi));
                    }
                    EstimatorId::Iptw => {}
                }
            }
        }
    }

    use crate::rng::CounterRng;

    #[test]
    fn bootstrap_is_deterministic() {
        let dgm = DgmSpec::appendix(1).unwrap();
        let ds = dgm.sample(400, CounterRng::new(3)).unwrap();
        let cfg = AnalysisConfig {
            estimators: vec![EstimatorId::TmleEff],
            ..correct_config(&dgm)
        };
        let rng = CounterRng::new(99);
        let base = analyze_full(&ds, &cfg).unwrap();
        let a = bootstrap_se(&ds, &cfg, &base, 5, &rng).unwrap();
        let b = bootstrap_se(&ds, &cfg, &base, 5, &rng).unwrap();
        assert_eq!(a[0].se_sde.to_bits(), b[0].se_sde.to_bits());
        assert_eq!(a[0].se_sie.to_bits(), b[0].se_sie.to_bits());
        assert!(a[0].se_sde > 0.0);
    }
}
