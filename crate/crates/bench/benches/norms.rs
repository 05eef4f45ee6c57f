use criterion::{criterion_group, criterion_main, Criterion};
use kfp_bench::{phase_grid, smooth_field};
use kfp_core::norms::{mixed_norm, MixedNormSpec, NormVariant};
use kfp_core::weights::{ProductWeight, Weight1D};

fn norms(c: &mut Criterion) {
    let f = smooth_field(&phase_grid(33), 6);
    let l2 = MixedNormSpec::lp(1, 2.0);
    let weighted = MixedNormSpec {
        p: 2.0,
        r: vec![3.0],
        q: 4.0,
        weight: ProductWeight {
            w0: Weight1D::power(0.5, 0.0, 4.0),
            wi: vec![Weight1D::power(0.5, 0.0, 3.0)],
            k: 4.0,
        },
        t_cut: None,
        variant: NormVariant::TimeOuter,
    };
    let mut group = c.benchmark_group("mixed_norm");
    group.bench_function("l2", |b| b.iter(|| mixed_norm(&f, &l2).unwrap()));
    group.bench_function("weighted_p2_r3_q4", |b| b.iter(|| mixed_norm(&f, &weighted).unwrap()));
    group.finish();
}

criterion_group!(benches, norms);
criterion_main!(benches);
