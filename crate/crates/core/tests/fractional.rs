use kfp_core::corpus::band_limited;
use kfp_core::fractional::{dyadic_tail, frac_laplacian_singular, frac_laplacian_x, mollify, TailField};
use kfp_core::spectral::{forward, grid_l2};
use kfp_core::{GridField, GridSpec};
use proptest::prelude::*;

/// x-only grid wide enough that the periodized Gaussian is the Gaussian.
fn wide() -> GridSpec {
    GridSpec::uniform(1, 0.0, 0.0, 1, 512.0, 1 << 14, 1.0, 2).unwrap()
}

#[test]
fn multiplier_agrees_with_singular_integral() {
    let g = wide();
    let u = GridField::from_fn(g.clone(), |_, x, _| (-x[0] * x[0]).exp());
    for s in [1.0 / 6.0, 1.0 / 3.0] {
        let lap = frac_laplacian_x(&u, s).unwrap();
        let mid = g.nx[0] / 2;
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..10 {
            let node = mid + 5 * j;
            let x = g.x_coord(0, node);
            let oracle = frac_laplacian_singular(|y: &[f64]| (-y[0] * y[0]).exp(), &[x], s).unwrap();
            scale = scale.max(oracle.abs());
            worst = worst.max((lap.values[node * g.nv[0]] - oracle).abs());
        }
        assert!(worst / scale < 1e-3, "s = {s}: {worst} / {scale}");
    }
}

#[test]
fn even_input_gives_even_output() {
    let g = GridSpec::uniform(1, 0.0, 0.0, 1, 8.0, 64, 1.0, 2).unwrap();
    let u = GridField::from_fn(g.clone(), |_, x, _| (-(x[0] * x[0])).exp() * (1.0 + x[0] * x[0]));
    let lap = frac_laplacian_x(&u, 1.0 / 3.0).unwrap();
    let n = g.nx[0];
    for j in 1..n / 2 {
        let a = lap.values[j * 2];
        let b = lap.values[(n - j) * 2];
        assert!((a - b).abs() < 1e-12, "{j}: {a} vs {b}");
    }
    let o = |x: f64| frac_laplacian_singular(|y: &[f64]| (-y[0] * y[0]).exp(), &[x], 1.0 / 3.0).unwrap();
    assert!((o(0.7) - o(-0.7)).abs() < 1e-10);
}

#[test]
fn constant_input_vanishes_for_both_routes() {
    let g = GridSpec::uniform(1, 0.0, 1.0, 3, 4.0, 16, 2.0, 8).unwrap();
    let c = GridField::from_fn(g, |_, _, _| 3.0);
    assert!(frac_laplacian_x(&c, 1.0 / 3.0).unwrap().max_abs() < 1e-14);
    assert!(frac_laplacian_singular(|_: &[f64]| 3.0, &[0.4], 1.0 / 3.0).unwrap().abs() < 1e-12);
}

fn shift_x(u: &GridField, m: usize) -> GridField {
    let g = &u.spec;
    let (nx, nv) = (g.nx[0], g.nv[0]);
    let mut out = u.clone();
    for it in 0..g.nt {
        let src = u.slab(it);
        let dst = out.slab_mut(it);
        for ix in 0..nx {
            let jx = (ix + m) % nx;
            dst[jx * nv..(jx + 1) * nv].copy_from_slice(&src[ix * nv..(ix + 1) * nv]);
        }
    }
    out
}

#[test]
fn mollifier_error_decreases_with_eps() {
    let g = GridSpec::uniform(1, 0.0, 1.0, 33, 3.0, 32, 3.0, 32).unwrap();
    let h = band_limited(&g, 3, 17, 0);
    let errs: Vec<f64> = (1..=6)
        .map(|j| {
            let eps = 0.5f64.powi(j);
            grid_l2(&mollify(&h, eps).unwrap().sub(&h).unwrap()) / grid_l2(&h)
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
    assert!(errs[5] < 0.05, "{errs:?}");
}

#[test]
fn dyadic_tail_examples() {
    // f ≡ 1, σ = 1, R = 1 at x = 0: 2∫_1^∞ y^{-2} dy = 2
    let g = dyadic_tail(&TailField::constant(1.0), 1.0, 1.0, 0.0).unwrap();
    assert!((g - 2.0).abs() < 1e-10, "{g}");
    assert_eq!(dyadic_tail(&TailField::constant(0.0), 0.7, 1.3, 0.2).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn semigroup_and_parseval(seed in 0u64..1000, modes in 1usize..6) {
        let g = GridSpec::uniform(1, 0.0, 1.0, 3, 4.0, 32, 3.0, 16).unwrap();
        let f = band_limited(&g, modes, seed, 0);
        let twice = frac_laplacian_x(&frac_laplacian_x(&f, 1.0 / 6.0).unwrap(), 1.0 / 6.0).unwrap();
        let once = frac_laplacian_x(&f, 1.0 / 3.0).unwrap();
        prop_assert!(twice.sub(&once).unwrap().max_abs() <= 1e-12 * once.max_abs().max(1.0));
        prop_assert!((grid_l2(&f) - forward(&f).l2()).abs() <= 1e-12 * grid_l2(&f));
    }

    #[test]
    fn commutes_with_periodic_translation(seed in 0u64..1000, m in 0usize..32) {
        let g = GridSpec::uniform(1, 0.0, 1.0, 2, 4.0, 32, 3.0, 8).unwrap();
        let f = band_limited(&g, 4, seed, 1);
        let a = shift_x(&frac_laplacian_x(&f, 1.0 / 3.0).unwrap(), m);
        let b = frac_laplacian_x(&shift_x(&f, m), 1.0 / 3.0).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-12 * a.max_abs().max(1.0));
    }
}
