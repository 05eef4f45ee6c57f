use criterion::{criterion_group, criterion_main, Criterion};
use kfp_bench::{phase_grid, smooth_field};
use kfp_core::fractional::{frac_laplacian_singular, frac_laplacian_x, mollify};

fn fractional(c: &mut Criterion) {
    let f = smooth_field(&phase_grid(33), 6);
    let mut group = c.benchmark_group("fractional");
    group.bench_function("multiplier_s1_3", |b| b.iter(|| frac_laplacian_x(&f, 1.0 / 3.0).unwrap()));
    group.bench_function("mollify", |b| b.iter(|| mollify(&f, 0.1).unwrap()));
    group.bench_function("singular_integral_point", |b| {
        b.iter(|| frac_laplacian_singular(|y: &[f64]| (-y[0] * y[0]).exp(), &[0.3], 1.0 / 3.0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fractional);
criterion_main!(benches);
