use std::f64::consts::PI;

use kfp_core::corpus::band_limited;
use kfp_core::norms::{mixed_norm, s_norm, MixedNormSpec, NormVariant};
use kfp_core::weights::{ProductWeight, Weight1D};
use kfp_core::{GridField, GridSpec};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Weights whose singular points lie outside the box, so node values are
/// plain evaluations.
fn smooth_weighted(p: f64, r: f64, q: f64) -> MixedNormSpec {
    MixedNormSpec {
        p,
        r: vec![r],
        q,
        weight: ProductWeight {
            w0: Weight1D::power(0.5, -0.5, q),
            wi: vec![Weight1D::power(0.3, 10.0, r)],
            k: 10.0,
        },
        t_cut: None,
        variant: NormVariant::TimeOuter,
    }
}

#[test]
fn factorized_field_is_product_of_one_dimensional_norms() {
    let g = GridSpec::uniform(1, 0.0, 1.0, 9, 2.0, 16, 2.0, 16).unwrap();
    let gt = |t: f64| 1.0 + t * t;
    let hx = |x: f64| 2.0 + (PI * x / 2.0).cos();
    let kv = |v: f64| (-v * v).exp();
    let f = GridField::from_fn(g.clone(), |t, x, v| gt(t) * hx(x[0]) * kv(v[0]));
    let (p, r, q) = (3.0, 2.5, 4.0);
    let spec = smooth_weighted(p, r, q);

    // rectangle rule on the periodic axes, trapezoid in t
    let dx = g.dx(0);
    let nx: f64 = g.x_coords(0).iter().map(|&x| hx(x).abs().powf(p) * dx).sum::<f64>().powf(1.0 / p);
    let dv = g.dv(0);
    let nv: f64 = g
        .v_coords(0)
        .iter()
        .map(|&v| kv(v).abs().powf(r) * (10.0 - v).abs().powf(0.3) * dv)
        .sum::<f64>()
        .powf(1.0 / r);
    let ts = g.times();
    let dt = g.dt();
    let nt: f64 = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let w = if i == 0 || i == ts.len() - 1 { 0.5 * dt } else { dt };
            w * gt(t).powf(q) * (t + 0.5).sqrt()
        })
        .sum::<f64>()
        .powf(1.0 / q);
    let got = mixed_norm(&f, &spec).unwrap();
    assert!(rel(got, nx * nv * nt) < 1e-12, "{got} vs {}", nx * nv * nt);
}

#[test]
fn unweighted_periodic_factor_matches_exact_integral() {
    // the rectangle rule is exact for trigonometric polynomials of low degree
    let g = GridSpec::uniform(1, 0.0, 1.0, 3, PI, 32, PI, 32).unwrap();
    let f = GridField::from_fn(g, |_, x, v| x[0].cos() * v[0].sin());
    let got = mixed_norm(&f, &MixedNormSpec::lp(1, 2.0)).unwrap();
    // ∫∫ cos² sin² over [-π, π)² = π², times the unit time window
    assert!(rel(got, PI) < 1e-12, "{got}");
}

#[test]
fn s_norm_components_match_analytic_derivatives() {
    let g = GridSpec::uniform(1, 0.0, 1.0, 9, 6.0, 64, 6.0, 64).unwrap();
    let bump = |x: f64, v: f64| (-x * x - v * v).exp();
    let u = GridField::from_fn(g.clone(), |t, x, v| (1.0 + t) * bump(x[0], v[0]));
    let dv = GridField::from_fn(g.clone(), |t, x, v| ((1.0 + t) * 2.0 * v[0] * bump(x[0], v[0])).abs());
    let d2v = GridField::from_fn(g.clone(), |t, x, v| ((1.0 + t) * (4.0 * v[0] * v[0] - 2.0) * bump(x[0], v[0])).abs());
    // Y u = ∂_t u - v ∂_x u
    let yu = GridField::from_fn(g, |t, x, v| bump(x[0], v[0]) * (1.0 + (1.0 + t) * 2.0 * x[0] * v[0]));
    let spec = MixedNormSpec {
        p: 2.0,
        r: vec![3.0],
        q: 2.5,
        weight: ProductWeight::unit(1),
        t_cut: None,
        variant: NormVariant::TimeOuter,
    };
    let s = s_norm(&u, &spec).unwrap();
    let n = |f: &GridField| mixed_norm(f, &spec).unwrap();
    assert!(rel(s.u, n(&u)) < 1e-14);
    assert!(rel(s.dv, n(&dv)) < 1e-9, "{} vs {}", s.dv, n(&dv));
    assert!(rel(s.d2v, n(&d2v)) < 1e-9, "{} vs {}", s.d2v, n(&d2v));
    assert!(rel(s.transport, n(&yu)) < 1e-9, "{} vs {}", s.transport, n(&yu));
    assert!(rel(s.total(), s.u + s.dv + s.d2v + s.transport) < 1e-15);
}

#[test]
fn s_norm_homogeneous_and_zero() {
    let g = GridSpec::uniform(1, 0.0, 1.0, 9, 3.0, 16, 3.0, 16).unwrap();
    let u = band_limited(&g, 3, 2, 0);
    let spec = MixedNormSpec::lp(1, 2.0);
    let a = s_norm(&u, &spec).unwrap().total();
    let b = s_norm(&u.scaled(2.0), &spec).unwrap().total();
    assert!(rel(b, 2.0 * a) < 1e-12);
    assert_eq!(s_norm(&GridField::zeros(g), &spec).unwrap().total(), 0.0);
}

#[test]
fn time_cut_matches_truncated_window() {
    // nodes up to T on the full grid are the nodes of the shorter grid
    let full = GridSpec::uniform(1, 0.0, 1.0, 9, 2.0, 8, 2.0, 8).unwrap();
    let short = GridSpec::uniform(1, 0.0, 0.5, 5, 2.0, 8, 2.0, 8).unwrap();
    let f = |t: f64, x: &[f64], v: &[f64]| (1.0 + t) * (x[0] + v[0]).cos() + 2.0;
    let mut spec = MixedNormSpec::lp(1, 3.0);
    spec.t_cut = Some(0.5);
    let a = mixed_norm(&GridField::from_fn(full, f), &spec).unwrap();
    spec.t_cut = None;
    let b = mixed_norm(&GridField::from_fn(short, f), &spec).unwrap();
    assert!(rel(a, b) < 1e-13, "{a} vs {b}");
}
