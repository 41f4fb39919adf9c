//! Transported stochastic direct and indirect mediation effects with an
//! intermediate confounder: IPTW, one-step estimating-equation, and TMLE
//! estimators, an exact-enumeration truth oracle for the built-in binary
//! data-generating mechanisms, and a replicated simulation harness.

pub mod data;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod nuisance;
pub mod rng;
pub mod sim;
pub mod terms;
pub mod truth;

pub use data::{Dataset, InterventionSpec, Observation};
pub use dgp::{DgmSpec, Labeling};
pub use error::{DataError, EstimationError, GlmError, Violation};
pub use estimators::{
    analyze, analyze_full, analyze_with_bootstrap, bootstrap_se, Analysis, AnalysisConfig,
    EffectEstimate, EstimateResult, EstimatorEffects, EstimatorId,
};
pub use nuisance::{
    fit_nuisance, predict_all, predict_all_from, NuisanceFits, NuisancePredictions,
};
pub use rng::CounterRng;
pub use sim::{
    apply_misspecification, run_replication, run_study, summarize, summary_csv, EffMode,
    Scenario, SimConfig, SimSummary, SummaryRow,
};
pub use terms::{Term, TermSpec, Var, Variant};
pub use truth::{
    data_dependent_psi, efficiency_bound, true_psi, truth_report, Contrast, TruthReport,
};
