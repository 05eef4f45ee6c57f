use criterion::{criterion_group, criterion_main, Criterion};
use kfp_bench::smooth_field;
use kfp_core::maximal::{maximal, sharp, CylinderFamily};
use kfp_core::GridSpec;

fn maximal_functions(c: &mut Criterion) {
    let grid = GridSpec::uniform(1, 0.0, 1.0, 16, 0.5, 16, 2.0, 16).unwrap();
    let f = smooth_field(&grid, 3);
    let fam = CylinderFamily::new(0.2, 3, 1.0, None).unwrap();
    let mut group = c.benchmark_group("maximal");
    group.sample_size(10);
    group.bench_function("hardy_littlewood", |b| b.iter(|| maximal(&f, &fam).unwrap()));
    group.bench_function("sharp", |b| b.iter(|| sharp(&f, &fam).unwrap()));
    group.finish();
}

criterion_group!(benches, maximal_functions);
criterion_main!(benches);
