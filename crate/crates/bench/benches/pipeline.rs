use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spacedeform::dissimilarity::gamma_matrix;
use spacedeform::pipeline::{default_anchors, fit_deformation};
use spacedeform::prediction::{conditional_sim, KrigingSystem};
use spacedeform::synthetic::{gen_1d, gen_2d};
use spacedeform::tuning::cv1_score;
use spacedeform::{FitOptions, HyperParams, MeanModel};

fn kernel(c: &mut Criterion) {
    let field = gen_2d(30, 1).unwrap();
    let anchors = default_anchors(&field.data).unwrap();
    let mut group = c.benchmark_group("kernel");
    group.sample_size(20);
    group.bench_function("gamma_matrix 900 data 121 anchors", |b| {
        b.iter(|| gamma_matrix(&anchors, &field.data, black_box(0.3)).unwrap())
    });
    for n in [200, 500] {
        let data = gen_1d(n, 2).unwrap().data;
        group.bench_with_input(BenchmarkId::new("cv1_score", n), &data, |b, data| {
            b.iter(|| cv1_score(data, black_box(0.5)).unwrap())
        });
    }
    group.finish();
}

fn fit(c: &mut Criterion) {
    let field = gen_2d(20, 3).unwrap();
    let anchors = default_anchors(&field.data).unwrap();
    let hyper = HyperParams::new(0.35, 0.5).unwrap();
    let options = FitOptions::default();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("fit_deformation 400 data", |b| {
        b.iter(|| fit_deformation(&field.data, &anchors, hyper, &options).unwrap())
    });
    group.finish();
}

fn prediction(c: &mut Criterion) {
    let field = gen_2d(30, 4).unwrap();
    let anchors = default_anchors(&field.data).unwrap();
    let fitted = fit_deformation(&field.data, &anchors, HyperParams::new(0.35, 0.5).unwrap(), &FitOptions::default())
        .unwrap();
    let targets = gen_2d(12, 5).unwrap().data.locations();
    let mut group = c.benchmark_group("prediction");
    group.sample_size(10);
    group.bench_function("kriging system 900 data", |b| {
        b.iter(|| KrigingSystem::new(fitted.deformed.clone(), field.data.values(), fitted.model.clone()).unwrap())
    });
    let system = KrigingSystem::new(fitted.deformed.clone(), field.data.values(), fitted.model.clone()).unwrap();
    group.bench_function("leave_one_out 900 data", |b| b.iter(|| system.leave_one_out()));
    group.bench_function("conditional_sim 144 targets x 20", |b| {
        b.iter(|| {
            conditional_sim(&targets, &field.data, &fitted.spline, &fitted.model, MeanModel::new(0.0).unwrap(), 20, 7)
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, kernel, fit, prediction);
criterion_main!(benches);
