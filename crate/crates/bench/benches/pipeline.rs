//! Pipeline benchmarks: nuisance fitting, single-estimator runs, the full
//! five-estimator analysis, and one simulated replication.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use transmed_core::estimators::{analyze, AnalysisConfig};
use transmed_core::nuisance::{fit_nuisance, predict_all};
use transmed_core::sim::{run_replication, EffMode, Scenario, SimConfig};
use transmed_core::{
    CounterRng, Dataset, DgmSpec, EstimatorId, InterventionSpec, Labeling, Variant,
};

fn dataset(n: usize) -> Dataset {
    DgmSpec::preset(1, Labeling::Main).unwrap().sample(n, CounterRng::new(42)).unwrap()
}

fn config(estimators: Vec<EstimatorId>) -> AnalysisConfig {
    let dgm = DgmSpec::preset(1, Labeling::Main).unwrap();
    AnalysisConfig {
        terms_restricted: dgm.correct_terms(Variant::Restricted),
        terms_unrestricted: dgm.correct_terms(Variant::Unrestricted),
        estimators,
        s_ref: 0,
        clip: 0.0,
    }
}

fn bench_nuisance(c: &mut Criterion) {
    let ds = dataset(5000);
    let cfg = config(vec![EstimatorId::TmleEff]);
    c.bench_function("fit_nuisance_restricted_n5000", |b| {
        b.iter(|| fit_nuisance(&ds, &cfg.terms_restricted, Variant::Restricted).unwrap())
    });
    let fits = fit_nuisance(&ds, &cfg.terms_restricted, Variant::Restricted).unwrap();
    let spec = InterventionSpec::effect_triple(0)[0];
    c.bench_function("predict_all_n5000", |b| {
        b.iter(|| predict_all(&fits, &ds, spec, 0.0).unwrap())
    });
}

fn bench_analyze(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze_all_estimators");
    for n in [500usize, 5000] {
        let ds = dataset(n);
        let cfg = config(EstimatorId::ALL.to_vec());
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| analyze(&ds, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_replication(c: &mut Criterion) {
    let sim = SimConfig {
        dgm: 1,
        labeling: Labeling::Main,
        n: 1000,
        reps: 1,
        boot: 0,
        seed: 7,
        s_ref: 0,
        scenario: Scenario::None,
        estimators: EstimatorId::ALL.to_vec(),
        eff_mode: EffMode::MeanNSe2,
        clip: 0.0,
    };
    c.bench_function("replication_n1000", |b| {
        b.iter(|| run_replication(&sim, 0).unwrap())
    });
}

criterion_group!(benches, bench_nuisance, bench_analyze, bench_replication);
criterion_main!(benches);
