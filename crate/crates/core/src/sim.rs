//! Replicated simulation studies: sampling, misspecification scenarios,
//! per-replication estimation, and table-style aggregation.

use crate::data::{Dataset, InterventionSpec};
use crate::dgp::{DgmSpec, Labeling};
use crate::error::EstimationError;
use crate::estimators::{
    analyze_with_bootstrap, variant_slot, AnalysisConfig, EstimatorEffects, EstimatorId,
};
use crate::rng::CounterRng;
use crate::terms::{TermSpec, Var, Variant};
use crate::truth::{data_dependent_psi, truth_report, Contrast, TruthReport};
use rayon::prelude::*;
use serde::Serialize;

/// Which nuisance models get the deliberately wrong (intercept + W1 only)
/// form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    None,
    Y,
    Yz,
    Ym,
    Ys,
    Zms,
}

impl Scenario {
    pub const ALL: [Scenario; 6] =
        [Scenario::None, Scenario::Y, Scenario::Yz, Scenario::Ym, Scenario::Ys, Scenario::Zms];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::None => "none",
            Scenario::Y => "y",
            Scenario::Yz => "yz",
            Scenario::Ym => "ym",
            Scenario::Ys => "ys",
            Scenario::Zms => "zms",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|sc| sc.label() == s)
    }

    fn breaks(self, model: Model) -> bool {
        match self {
            Scenario::None => false,
            Scenario::Y => model == Model::Y,
            Scenario::Yz => matches!(model, Model::Y | Model::Z),
            Scenario::Ym => matches!(model, Model::Y | Model::M),
            Scenario::Ys => matches!(model, Model::Y | Model::S),
            Scenario::Zms => matches!(model, Model::Z | Model::M | Model::S),
        }
    }
}

/// Nuisance models a scenario can name (the treatment model is never
/// misspecified: A is randomized in every DGM).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    Z,
    M,
    S,
    Y,
}

/// Replace each model named by the scenario with intercept + W1 (dropping
/// W2 and every interaction, so the misspecification always binds).
pub fn apply_misspecification(correct: &TermSpec, scenario: Scenario) -> TermSpec {
    let wrong = vec![vec![Var::W1]];
    let pick = |model: Model, terms: &Vec<Vec<Var>>| {
        if scenario.breaks(model) {
            wrong.clone()
        } else {
            terms.clone()
        }
    };
    TermSpec {
        a: correct.a.clone(),
        z: pick(Model::Z, &correct.z),
        m: pick(Model::M, &correct.m),
        s: pick(Model::S, &correct.s),
        y: pick(Model::Y, &correct.y),
    }
}

/// How the efficiency percentage is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EffMode {
    /// 100 · mean over reps of (n · SE²) / bound.
    MeanNSe2,
    /// 100 · n · Var(estimates over reps) / bound.
    EmpiricalVariance,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub dgm: u8,
    pub labeling: Labeling,
    pub n: usize,
    pub reps: usize,
    /// Bootstrap resamples per replication; 0 disables the bootstrap.
    pub boot: usize,
    pub seed: u64,
    pub s_ref: u8,
    pub scenario: Scenario,
    pub estimators: Vec<EstimatorId>,
    pub eff_mode: EffMode,
    pub clip: f64,
}

impl SimConfig {
    pub fn dgm_spec(&self) -> Option<DgmSpec> {
        DgmSpec::preset(self.dgm, self.labeling)
    }

    fn analysis_config(&self, dgm: &DgmSpec) -> AnalysisConfig {
        AnalysisConfig {
            terms_restricted: apply_misspecification(
                &dgm.correct_terms(Variant::Restricted),
                self.scenario,
            ),
            terms_unrestricted: apply_misspecification(
                &dgm.correct_terms(Variant::Unrestricted),
                self.scenario,
            ),
            estimators: self.estimators.clone(),
            s_ref: self.s_ref,
            clip: self.clip,
        }
    }
}

/// One effect estimate from one replication.
#[derive(Debug, Clone, Serialize)]
pub struct RepEffect {
    pub estimate: f64,
    pub se_ic: f64,
    pub se_boot: Option<f64>,
    /// The replication's own target: the effect with the fitted
    /// stochastic-intervention density plugged into the true outcome and
    /// covariate distributions. The intervention density is estimated, so
    /// the estimand is data-dependent and moves with the sample.
    pub truth: f64,
    /// Effect outside [−1,1] or any component ψ outside [0,1].
    pub oob: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    /// Per estimator (in config order): [SDE, SIE].
    pub effects: Vec<[RepEffect; 2]>,
}

fn rep_effect(r: &EstimatorEffects, effect: Contrast, truth: f64) -> RepEffect {
    let e = match effect {
        Contrast::Sde => &r.sde,
        Contrast::Sie => &r.sie,
    };
    let component_oob = r.components.iter().any(|c| !(0.0..=1.0).contains(&c.psi));
    RepEffect {
        estimate: e.estimate,
        se_ic: e.se_ic,
        se_boot: e.se_boot,
        truth,
        oob: !(-1.0..=1.0).contains(&e.estimate) || component_oob,
    }
}

/// Sample one dataset and run every configured estimator. Seeds derive
/// from (seed, rep), so records are identical regardless of scheduling.
pub fn run_replication(config: &SimConfig, rep: usize) -> Result<RepRecord, EstimationError> {
    let dgm = config.dgm_spec().expect("valid DGM id");
    let rng = CounterRng::new(config.seed).stream(rep as u64);
    let dataset = dgm.sample(config.n, rng.stream(0))?;
    let analysis =
        analyze_with_bootstrap(&dataset, &config.analysis_config(&dgm), config.boot, &rng.stream(1))?;
    // Per-variant data-dependent targets: [SDE, SIE] from the three psi
    // values with this replication's fitted intervention density.
    let mut variant_truth: [Option<[f64; 2]>; 2] = [None, None];
    for variant in [Variant::Restricted, Variant::Unrestricted] {
        if let Some(fits) = analysis.fits_for(variant) {
            let [s10, s00, s11] = InterventionSpec::effect_triple(config.s_ref);
            let p10 = data_dependent_psi(&dgm, fits, s10)?;
            let p00 = data_dependent_psi(&dgm, fits, s00)?;
            let p11 = data_dependent_psi(&dgm, fits, s11)?;
            variant_truth[variant_slot(variant)] = Some([p10 - p00, p11 - p10]);
        }
    }
    Ok(RepRecord {
        rep,
        effects: analysis
            .effects
            .iter()
            .map(|r| {
                let t = variant_truth[variant_slot(r.estimator.variant())]
                    .expect("truth computed for every requested variant");
                [rep_effect(r, Contrast::Sde, t[0]), rep_effect(r, Contrast::Sie, t[1])]
            })
            .collect(),
    })
}

/// One Table-2-style summary row.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub estimator: EstimatorId,
    pub effect: Contrast,
    pub bias: f64,
    pub eff_ic: f64,
    pub eff_boot: Option<f64>,
    pub cover_ic: f64,
    pub cover_boot: Option<f64>,
    pub rmse: f64,
    /// Percent of replications flagged out of bounds.
    pub pct_oob: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub scenario: Scenario,
    pub n: usize,
    pub reps: usize,
    pub eff_mode: EffMode,
    pub truth: TruthReport,
    pub rows: Vec<SummaryRow>,
}

/// No replication produced estimates, so there is nothing to summarize.
#[derive(Debug, thiserror::Error)]
#[error("all {0} replications failed")]
pub struct AllReplicationsFailed(pub usize);

/// Aggregate per-rep records into bias / RMSE / coverage / efficiency /
/// out-of-bounds rates against the enumerated truth.
pub fn summarize(
    config: &SimConfig,
    records: &[RepRecord],
    failures: usize,
) -> Result<SimSummary, AllReplicationsFailed> {
    if records.is_empty() {
        return Err(AllReplicationsFailed(config.reps));
    }
    let dgm = config.dgm_spec().expect("valid DGM id");
    let truth = truth_report(&dgm, config.s_ref);
    let n = config.n as f64;
    let r = records.len() as f64;
    let mut rows = Vec::new();
    for (k, &estimator) in config.estimators.iter().enumerate() {
        for (j, effect) in [Contrast::Sde, Contrast::Sie].into_iter().enumerate() {
            let bound = match effect {
                Contrast::Sde => truth.eff_bound_sde,
                Contrast::Sie => truth.eff_bound_sie,
            };
            // Each replication is scored against its own data-dependent
            // target (the fitted intervention density plugged into the true
            // distributions), so errors are estimate − per-rep truth.
            let per_rep: Vec<&RepEffect> = records.iter().map(|rec| &rec.effects[k][j]).collect();
            let errors: Vec<f64> = per_rep.iter().map(|e| e.estimate - e.truth).collect();
            let bias = errors.iter().sum::<f64>() / r;
            let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / r).sqrt();
            let covered = |se: f64, e: &RepEffect| {
                (e.estimate - 1.96 * se..=e.estimate + 1.96 * se).contains(&e.truth)
            };
            let cover_ic = per_rep.iter().filter(|e| covered(e.se_ic, e)).count() as f64 / r;
            let have_boot = per_rep.iter().all(|e| e.se_boot.is_some());
            let cover_boot = have_boot.then(|| {
                per_rep
                    .iter()
                    .filter(|e| covered(e.se_boot.unwrap(), e))
                    .count() as f64
                    / r
            });
            let eff = |var_hat: f64| 100.0 * var_hat / bound;
            let emp_var = {
                let m = bias;
                errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (r - 1.0).max(1.0)
            };
            let eff_from_se = |se_of: &dyn Fn(&RepEffect) -> f64| {
                eff(per_rep.iter().map(|e| n * se_of(e).powi(2)).sum::<f64>() / r)
            };
            let (eff_ic, eff_boot) = match config.eff_mode {
                EffMode::MeanNSe2 => (
                    eff_from_se(&|e: &RepEffect| e.se_ic),
                    have_boot.then(|| eff_from_se(&|e: &RepEffect| e.se_boot.unwrap())),
                ),
                EffMode::EmpiricalVariance => {
                    let v = eff(n * emp_var);
                    (v, have_boot.then_some(v))
                }
            };
            let pct_oob = 100.0 * per_rep.iter().filter(|e| e.oob).count() as f64 / r;
            rows.push(SummaryRow {
                estimator,
                effect,
                bias,
                eff_ic,
                eff_boot,
                cover_ic,
                cover_boot,
                rmse,
                pct_oob,
                failures,
            });
        }
    }
    Ok(SimSummary {
        scenario: config.scenario,
        n: config.n,
        reps: config.reps,
        eff_mode: config.eff_mode,
        truth,
        rows,
    })
}

/// Full study: replications in parallel (deterministic per-rep seeds, so
/// the result is independent of thread count), then aggregation.
pub fn run_study(config: &SimConfig) -> Result<SimSummary, AllReplicationsFailed> {
    let outcomes: Vec<Result<RepRecord, EstimationError>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    let records: Vec<RepRecord> = outcomes.into_iter().flatten().collect();
    summarize(config, &records, failures)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// CSV rendering with fixed six-decimal formatting (bit-stable across
/// runs and thread counts).
pub fn summary_csv(summary: &SimSummary) -> String {
    let mut out = String::from(
        "estimator,effect,bias,eff_ic,eff_boot,cover_ic,cover_boot,rmse,pct_oob,failures\n",
    );
    for row in &summary.rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{},{:.6},{},{:.6},{:.6},{}\n",
            row.estimator.label(),
            row.effect.label(),
            row.bias,
            row.eff_ic,
            fmt_opt(row.eff_boot),
            row.cover_ic,
            fmt_opt(row.cover_boot),
            row.rmse,
            row.pct_oob,
            row.failures,
        ));
    }
    out
}

/// Run every estimator once on the exact-distribution dataset; used by
/// self-checks: every estimate must equal the enumerated truth.
pub fn exact_distribution_records(
    config: &SimConfig,
) -> Result<Vec<EstimatorEffects>, EstimationError> {
    let dgm = config.dgm_spec().expect("valid DGM id");
    let dataset: Dataset = dgm.exact_dataset();
    crate::estimators::analyze(&dataset, &config.analysis_config(&dgm))
}
