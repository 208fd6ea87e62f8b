use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dirichlet_ball::ballquad::{seminorm_value, QuadratureGrid};
use dirichlet_ball::boundary::classify_zero_set;
use dirichlet_ball::capacity::{capacity_scan, SupportSet};
use dirichlet_ball::dilation::dilation_norm;
use dirichlet_ball::opa::opa_curve;
use dirichlet_ball::poly2::reciprocal;
use dirichlet_ball::AlphaWeight;
use dirichlet_ball_bench::{dense_poly, model_curve_poly, single_zero_poly};

fn series(c: &mut Criterion) {
    let mut g = c.benchmark_group("reciprocal");
    for order in [64u32, 256] {
        let p = dense_poly(3);
        g.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &n| {
            b.iter(|| reciprocal(black_box(&p), n))
        });
    }
    g.finish();
}

fn opa(c: &mut Criterion) {
    let p = model_curve_poly();
    let aw = AlphaWeight::new(2.0);
    c.bench_function("opa_curve/1-2zw/n=20", |b| b.iter(|| opa_curve(black_box(&p), &aw, 20)));
}

fn dilation(c: &mut Criterion) {
    let p = model_curve_poly();
    let aw = AlphaWeight::new(2.0);
    let mut g = c.benchmark_group("dilation_norm");
    g.sample_size(10);
    for r in [0.75, 0.96875] {
        g.bench_with_input(BenchmarkId::from_parameter(r), &r, |b, &r| {
            b.iter(|| dilation_norm(black_box(&p), r, &aw, 1e-10))
        });
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let p = dense_poly(6);
    let grid = QuadratureGrid::for_degree(6);
    c.bench_function("seminorm/deg6", |b| b.iter(|| seminorm_value(black_box(&p), 0.5, &grid)));
}

fn zero_sets(c: &mut Criterion) {
    let mut g = c.benchmark_group("classify_zero_set");
    g.sample_size(10);
    g.bench_function("1-z", |b| b.iter(|| classify_zero_set(black_box(&single_zero_poly()))));
    g.bench_function("1-2zw", |b| b.iter(|| classify_zero_set(black_box(&model_curve_poly()))));
    g.finish();
}

fn capacity(c: &mut Criterion) {
    let mut g = c.benchmark_group("capacity_scan");
    g.sample_size(10);
    g.bench_function("model_curve/512", |b| {
        b.iter(|| capacity_scan(&SupportSet::ModelCurve, black_box(1.5), &[256, 512]))
    });
    g.finish();
}

criterion_group!(benches, series, opa, dilation, quadrature, zero_sets, capacity);
criterion_main!(benches);
