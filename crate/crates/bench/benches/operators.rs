use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use clusterfit_core::basis::DictionaryConfig;
use clusterfit_core::config::ModelConfig;
use clusterfit_core::experiments::{make_test_profile, simulate_image, PointSourceSet, ProfileName};
use clusterfit_core::model::ForwardModel;
use clusterfit_core::qut::{fit_at, zero_threshold, ZeroThresholdFn};
use clusterfit_core::rng::{domain, stream};
use clusterfit_core::solver::{objective_grad, FitOptions};

fn model(n: usize) -> ForwardModel {
    ModelConfig::default().build(n, &DictionaryConfig::default(), 1.0).unwrap()
}

fn image(m: &ForwardModel, exposure: f64) -> Vec<f64> {
    let truth = make_test_profile(ProfileName::CosmoBlocks, m.grid(), 0.2).unwrap();
    let mut rng = stream(1, domain::SIMULATE, 0);
    simulate_image(m, &truth, &PointSourceSet::empty(m.n()), exposure, &mut rng).unwrap().into_values()
}

fn operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("operators");
    for n in [64usize, 128] {
        let m = model(n);
        let coef = {
            let mut c = m.zero_coefficients();
            c.set_alpha0(0.1);
            c.alpha_mut()[3] = 0.5;
            c
        };
        let profile = m.profile_of(&coef).unwrap();
        let img = m.linear(&coef).unwrap();
        g.bench_with_input(BenchmarkId::new("abel_apply", n), &n, |b, _| b.iter(|| m.abel().project(&profile).unwrap()));
        g.bench_with_input(BenchmarkId::new("abel_adjoint", n), &n, |b, _| b.iter(|| m.abel().adjoint(&img).unwrap()));
        g.bench_with_input(BenchmarkId::new("blur_apply", n), &n, |b, _| b.iter(|| m.blur().apply(&img).unwrap()));
        g.bench_with_input(BenchmarkId::new("forward_linear", n), &n, |b, _| b.iter(|| m.linear(&coef).unwrap()));
        g.bench_with_input(BenchmarkId::new("forward_adjoint", n), &n, |b, _| b.iter(|| m.adjoint(&img).unwrap()));
        let y = image(&m, 1.0);
        g.bench_with_input(BenchmarkId::new("objective_grad", n), &n, |b, _| {
            b.iter(|| objective_grad(&y, &m, &coef).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("zero_threshold", n), &n, |b, _| b.iter(|| zero_threshold(&y, &m).unwrap()));
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solver");
    g.sample_size(10);
    let m = model(32);
    let y = image(&m, 1.0);
    let a0 = ZeroThresholdFn::new(&m).unwrap().alpha0(&y).unwrap();
    let zt = zero_threshold(&y, &m).unwrap();
    let opts = FitOptions::default();
    g.bench_function("fit_n32_half_threshold", |b| {
        b.iter(|| fit_at(&y, &m, 0.5 * zt.lambda1, 0.5 * zt.lambda2, a0, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, operators, solver);
criterion_main!(benches);
