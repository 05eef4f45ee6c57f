use kfp_core::geometry::{
    ball_sandwich_run, cylinder_volume_mc, doubling_run, inverse_scaling_map, quasi_distance, quasi_metric_run,
    random_point, scaling_map,
};
use kfp_core::rng::seeded;
use kfp_core::{Cylinder, CylinderSide, PhasePoint, QuasiMetricParams};
use proptest::prelude::*;

#[test]
fn quasi_metric_inequalities_hold_on_random_triples() {
    for d in 1..=3 {
        let rep = quasi_metric_run(100_000, d, 11 + d as u64);
        assert_eq!(rep.triples, 100_000);
        assert_eq!(rep.symmetry_violations, 0, "{rep:?}");
        assert_eq!(rep.triangle_violations, 0, "{rep:?}");
        assert!(rep.worst_symmetry <= 2.0 && rep.worst_triangle <= 2.0);
    }
}

#[test]
fn ball_sandwich_by_rejection() {
    for d in 1..=2 {
        let rep = ball_sandwich_run(10_000, d, 5);
        assert_eq!(rep.inner_violations, 0);
        assert_eq!(rep.outer_violations, 0);
        assert!(rep.inner_hits > 1000, "{rep:?}");
    }
}

#[test]
fn doubling_ratio_bounded() {
    // without the time cut the ratio is exactly 2^{2+4d} by scaling
    let rep = doubling_run(200, 20_000, 1, 3);
    assert!(rep.ratios.iter().all(|r| r.is_finite() && *r >= 1.0));
    assert!(rep.max_ratio <= 2f64.powi(7), "{}", rep.max_ratio);
}

#[test]
fn monte_carlo_volume_agrees_with_closed_form() {
    let mut rng = seeded(9);
    for (r, big_r) in [(0.5, 1.0), (1.0, 2.0), (1.3, 1.3)] {
        let z0 = PhasePoint::new(0.3, vec![1.0, -2.0], vec![0.5, 3.0]).unwrap();
        for side in [CylinderSide::Past, CylinderSide::TwoSided] {
            let q = Cylinder::new(z0.clone(), r, big_r, side).unwrap();
            let (est, se) = cylinder_volume_mc(&mut rng, &q, 200_000);
            assert!((est - q.volume()).abs() <= 3.0 * se, "{est} ± {se} vs {}", q.volume());
        }
    }
}

proptest! {
    #[test]
    fn scaling_roundtrip(seed in 0u64..1000, r in 0.1f64..5.0) {
        let mut rng = seeded(seed);
        let z = random_point(&mut rng, 2, 10.0);
        let z0 = random_point(&mut rng, 2, 10.0);
        let back = inverse_scaling_map(&scaling_map(&z, &z0, r).unwrap(), &z0, r).unwrap();
        let scale = 1.0 + [z.t].iter().chain(&z.x).chain(&z.v).fold(0.0f64, |m, a| m.max(a.abs()));
        prop_assert!((back.t - z.t).abs() <= 1e-12 * scale);
        for (a, b) in back.x.iter().zip(&z.x).chain(back.v.iter().zip(&z.v)) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn distance_scales_with_radius(seed in 0u64..1000, r in 0.2f64..4.0, c in 1.0f64..10.0) {
        // ρ(δ_r z, δ_r 0 + z0) = r ρ(z, 0)
        let mut rng = seeded(seed);
        let z = random_point(&mut rng, 1, 5.0);
        let z0 = random_point(&mut rng, 1, 5.0);
        let p = QuasiMetricParams::new(c).unwrap();
        let o = PhasePoint::origin(1);
        let lhs = quasi_distance(&scaling_map(&z, &z0, r).unwrap(), &z0, p).unwrap();
        let rhs = r * quasi_distance(&z, &o, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
    }

    #[test]
    fn cylinder_scales_to_unit(seed in 0u64..1000, r in 0.2f64..4.0) {
        let mut rng = seeded(seed);
        let z = random_point(&mut rng, 1, 1.5);
        let z0 = random_point(&mut rng, 1, 5.0);
        let unit = Cylinder::past(PhasePoint::origin(1), 1.0).unwrap();
        let scaled = Cylinder::past(z0.clone(), r).unwrap();
        let zt = scaling_map(&z, &z0, r).unwrap();
        // skip points within round-off of the boundary
        let margin = [z.t.abs(), (z.t + 1.0).abs(), (z.v[0].abs() - 1.0).abs(), (z.x[0].abs() - 1.0).abs()]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        prop_assume!(margin > 1e-9);
        prop_assert_eq!(unit.contains(&z).unwrap(), scaled.contains(&zt).unwrap());
    }
}
