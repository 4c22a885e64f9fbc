use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64 as C64;
use pevo_core::calculus::{invert_e_lambda, InversionOptions, LambdaField};
use pevo_core::quantizer::{apply_left, operator_matrix};
use pevo_core::{GevreyConfig, Grid, Side, StateVector, SymbolGrid};

fn symbol(g: &Grid) -> SymbolGrid {
    SymbolGrid::from_fn(g, 1.0, 0.0, |x, xi| C64::new((0.3 * x).cos() * xi, 1.0 / (1.0 + x * x))).unwrap()
}

fn state(g: &Grid) -> StateVector {
    StateVector::from_fn(g, |x| C64::new((-x * x).exp(), 0.0))
}

fn quantization(c: &mut Criterion) {
    let mut group = c.benchmark_group("quantize");
    for n in [64usize, 128, 256] {
        let g = Grid::new(12.0, n, 4.0).unwrap();
        let (p, u) = (symbol(&g), state(&g));
        group.bench_with_input(BenchmarkId::new("apply_left", n), &n, |b, _| b.iter(|| apply_left(black_box(&p), black_box(&u)).unwrap()));
        group.bench_with_input(BenchmarkId::new("operator_matrix", n), &n, |b, _| {
            b.iter(|| operator_matrix(black_box(&p), Side::Left))
        });
    }
    group.finish();
}

fn inversion(c: &mut Criterion) {
    let mut group = c.benchmark_group("invert_e_lambda");
    group.sample_size(10);
    let cfg = GevreyConfig { h: 4.0, ..GevreyConfig::kdv3() };
    for n in [64usize, 128] {
        let g = Grid::new(12.0, n, cfg.h).unwrap();
        let lam = LambdaField::new(&cfg, 1.0, &g, None, 0).unwrap().table();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| invert_e_lambda(black_box(&lam), InversionOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let g = Grid::new(12.0, 512, 4.0).unwrap();
    c.bench_function("spectrum 512", |b| b.iter(|| state(black_box(&g)).spectrum().len()));
}

criterion_group!(benches, quantization, inversion, spectrum);
criterion_main!(benches);
