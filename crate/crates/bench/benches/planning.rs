use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{Matrix4, Vector2, Vector4};
use rhodec::tracking::{build_tracking_model, KalmanEstimate, TrackingModelParams, TrackingScenario};
use rhodec::{
    belief_update, build_mav_domain, make_baseline_policy, policy_value, BaselineKind, HeuristicKind, MaaStar,
    MavDomainParams,
};
use std::hint::black_box;

fn solve_mav(c: &mut Criterion) {
    let model = build_mav_domain(&MavDomainParams::default());
    let mut group = c.benchmark_group("maastar_mav");
    group.sample_size(20);
    for h in 1..=3 {
        for (name, kind) in [("pomdp", HeuristicKind::CentralizedPomdp), ("mdp", HeuristicKind::Mdp)] {
            group.bench_with_input(BenchmarkId::new(name, h), &h, |b, &h| {
                b.iter(|| MaaStar::new(&model, h).heuristic(kind).solve().unwrap().value)
            });
        }
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let model = build_mav_domain(&MavDomainParams::default());
    let policy = make_baseline_policy(BaselineKind::TurnTaking1, 3);
    c.bench_function("policy_value_h3", |b| b.iter(|| policy_value(&model, black_box(&policy), 3)));
    let b0 = model.initial_belief().clone();
    c.bench_function("belief_update", |b| b.iter(|| belief_update(&model, black_box(&b0), 3, 5).unwrap()));
}

fn tracking_model(c: &mut Criterion) {
    let scenario = TrackingScenario::default();
    let cov = Matrix4::from_diagonal(&Vector4::new(0.01, 0.01, 0.02, 0.02));
    let est = KalmanEstimate::new(Vector4::new(2.0, 2.0, 0.1, 0.0), cov).unwrap();
    let params = TrackingModelParams::default();
    let mut group = c.benchmark_group("tracking");
    group.sample_size(10);
    group.bench_function("build_model", |b| {
        b.iter(|| build_tracking_model(&est, &scenario.observers, &Vector2::new(0.1, 0.0), &params).unwrap())
    });
    let step = build_tracking_model(&est, &scenario.observers, &Vector2::new(0.1, 0.0), &params).unwrap();
    group.bench_function("solve_h3", |b| b.iter(|| MaaStar::new(&step.model, 3).solve().unwrap().value));
    group.finish();
}

criterion_group!(benches, solve_mav, evaluation, tracking_model);
criterion_main!(benches);
