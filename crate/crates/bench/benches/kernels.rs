use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use qplab_core::arith::golden_mean;
use qplab_core::cocycle;
use qplab_core::dual;
use qplab_core::schrodinger::{self, potential_diagonal};
use qplab_core::{tridiag, Potential, TrigPotential};

fn product_qr(c: &mut Criterion) {
    let mut g = c.benchmark_group("product_qr");
    let amo: Potential = TrigPotential::amo(2.0).into();
    let sch = schrodinger::schrodinger_cocycle(&amo, golden_mean(), 0.3);
    g.bench_function("schrodinger_2x2_1e5", |b| {
        b.iter(|| cocycle::product_qr(black_box(&sch), 0.1, 100_000, sch.default_renorm_every()).unwrap())
    });
    let v = TrigPotential::stock_d2_non_even();
    let dc = dual::dual_cocycle(&v, golden_mean(), Complex64::new(0.4, 0.0), 0.0).unwrap();
    g.bench_function("dual_4x4_1e5", |b| {
        b.iter(|| cocycle::product_qr(black_box(&dc.map), 0.1, 100_000, dc.map.default_renorm_every()).unwrap())
    });
    g.finish();
}

fn sturm(c: &mut Criterion) {
    let mut g = c.benchmark_group("sturm_count");
    let poly = TrigPotential::amo(2.0);
    for size in [1000usize, 4000, 16000] {
        let d = potential_diagonal(&poly, golden_mean(), 0.0, size);
        g.bench_with_input(BenchmarkId::from_parameter(size), &d, |b, d| {
            b.iter(|| tridiag::sturm_count(black_box(d), 1.0, black_box(0.37)))
        });
    }
    g.finish();
}

criterion_group!(benches, product_qr, sturm);
criterion_main!(benches);
