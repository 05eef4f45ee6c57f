//! Acceptance suite: one line per criterion, every tolerance pinned below.
//! Runs without the libtest harness so the report prints as is; the process
//! exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use kfp_core::coefficients::{
    osc_at_probe, osc_prime, osc_xv, CoefficientField, CoefficientKind, MatrixNorm, OscSampling, SmoothFamily,
};
use kfp_core::corpus::{band_limited, interior_bumps, SourceCorpus};
use kfp_core::fractional::{frac_laplacian_singular, frac_laplacian_x, tail_bound_check, TailField};
use kfp_core::geometry::{ball_sandwich_run, doubling_run, quasi_metric_run, random_point, slice_d};
use kfp_core::maximal::{fs_check, hl_check, maximal, sharp, CylinderFamily};
use kfp_core::norms::{MixedNormSpec, NormVariant};
use kfp_core::rng::stream;
use kfp_core::solver::{
    apply_operator, relative_residual, solve_duhamel, solve_mode, AnalyticSource, Envelope, FnModeSource,
    QuadratureOptions, SolveConfig, SourceTerm, TimeProfile,
};
use kfp_core::coefficients::LowerOrderTerms;
use kfp_core::spectral::{forward, grid_l2};
use kfp_core::verification::{
    delta_sweep, dyadic_deltas, estimate_corpus, interpolation_check, Case, FrozenConstant, HEADROOM,
};
use kfp_core::weights::{ap_constant_1d, kinetic_ap_functional, IntervalFamily, KineticApParams, ProductWeight, Weight1D};
use kfp_core::{Cylinder, GridField, GridSpec, PhasePoint};

mod common;

const SEED_A: u64 = 0x5eed_a;
const SEED_B: u64 = 0x5eed_b;

// 1. solver closure
const CLOSURE_SOURCES: u64 = 20;
const CLOSURE_TOL: f64 = 1e-6;
const CLOSURE_BUDGET_S: f64 = 120.0;
const CLOSURE_A: f64 = 0.4;
const CLOSURE_LAMBDA: f64 = 1.5;

// 2. closed-form anchors
const STEADY_TOL: f64 = 1e-8;
const X_MODE_TOL: f64 = 1e-6;

// 3. unweighted L2 estimate
const ESTIMATE_CORPUS: u64 = 10;
const ESTIMATE_LAMBDA: f64 = 1.0;
const SWEEP_CORPUS: u64 = 6;
const SWEEP_DELTAS: usize = 7;
const DESIGNED_SLOPE: f64 = -1.0;
const DESIGNED_SLOPE_TOL: f64 = 0.05;
const THETA_MAX: f64 = 3.0;

// 4. weighted mixed-norm estimate
const MIXED_BUDGET_S: f64 = 300.0;

// 5. geometry
const TRIPLES: usize = 100_000;
const SANDWICH_SAMPLES: usize = 10_000;
const DOUBLING_CONFIGS: usize = 1_000;
const DOUBLING_SAMPLES: usize = 20_000;

// 6. weights
const AP_STABILITY: f64 = 0.05;
const KINETIC_CONFIGS: u64 = 1_000;
const KINETIC_SAMPLES: usize = 20_000;
const KINETIC_CAP: f64 = 10.0;

// 7. maximal and sharp functions
const HL_CORPUS: u64 = 50;
const HL_STABILITY: f64 = 0.10;

// 8. fractional operators
const ORACLE_TOL: f64 = 1e-3;
const SEMIGROUP_TOL: f64 = 1e-12;
const PARSEVAL_TOL: f64 = 1e-12;

// 9. oscillation
const OSC_CYLINDERS: u64 = 100;
const HOLDER_SLOPE_TOL: f64 = 0.15;

// 10. dyadic tail and interpolation
const TAIL_FIELDS: u64 = 20;
const INTERP_EPS: [f64; 3] = [0.1, 1.0, 10.0];
const INTERP_CORPUS: u64 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> kfp_core::Result<Outcome>;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("solver closure", solver_closure),
        ("closed-form anchors", anchors),
        ("L2 estimate and delta sweep", l2_estimate),
        ("weighted mixed-norm estimate", mixed_estimate),
        ("geometry", geometry),
        ("weights", weights),
        ("maximal and sharp functions", maximal_sharp),
        ("fractional operators", fractional),
        ("oscillation", oscillation),
        ("dyadic tail and interpolation", tail_and_interpolation),
    ];
    let only: Option<usize> = std::env::var("KFP_CRITERION").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {:<4} {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn closure_grid(nt: usize) -> GridSpec {
    GridSpec::uniform(1, 0.0, 1.0, nt, 12.0, 64, 10.0, 64).unwrap()
}

fn sources(seed: u64, n: u64) -> Vec<Case> {
    let corpus = SourceCorpus::standard();
    (0..n)
        .map(|i| Case {
            id: format!("s{seed:x}-{i}"),
            source: corpus.sample(12.0, seed, i),
        })
        .collect()
}

fn solver_closure() -> kfp_core::Result<Outcome> {
    let start = Instant::now();
    let a = CoefficientField::scalar(1, CLOSURE_A)?;
    let grid = closure_grid(65);
    let cfg = SolveConfig::new(grid.clone(), CLOSURE_LAMBDA);
    let lot = LowerOrderTerms::lambda_only(CLOSURE_LAMBDA);
    let mut worst = 0.0f64;
    for case in sources(SEED_A, CLOSURE_SOURCES) {
        let u = solve_duhamel(&a, &case.source, &cfg)?;
        let f = case.source.sample(&grid)?;
        worst = worst.max(relative_residual(&apply_operator(&a, &lot, &u)?, &f)?);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome {
        pass: worst <= CLOSURE_TOL && secs <= CLOSURE_BUDGET_S,
        detail: format!(
            "worst relative residual {worst:.2e} (tol {CLOSURE_TOL:.0e}) over {CLOSURE_SOURCES} sources, {secs:.1}s (budget {CLOSURE_BUDGET_S}s)"
        ),
    })
}

fn cos_v_source() -> AnalyticSource {
    AnalyticSource {
        d: 1,
        terms: vec![SourceTerm {
            amplitude: 1.0,
            time: TimeProfile::Constant,
            x_env: Envelope::Plane,
            v_env: Envelope::Plane,
            k_mod: vec![0.0],
            xi_mod: vec![1.0],
            phase: 0.0,
        }],
    }
}

fn anchors() -> kfp_core::Result<Outcome> {
    let a = CoefficientField::scalar(1, 1.0)?;
    let grid = GridSpec::uniform(1, 0.0, 1.0, 5, PI, 8, PI, 16)?;
    let u = solve_duhamel(&a, &cos_v_source(), &SolveConfig::new(grid.clone(), 1.0))?;
    let exact = GridField::from_fn(grid, |_, _, v| 0.5 * v[0].cos());
    let steady = u.sub(&exact)?.max_abs();

    let unit = FnModeSource {
        f: |_t: f64, _eta: &[f64]| Complex64::new(1.0, 0.0),
        support: (f64::NEG_INFINITY, f64::INFINITY),
        breaks: vec![],
        time_scale: f64::INFINITY,
        frequency_scale: f64::INFINITY,
    };
    let v = solve_mode(&a, 0.0, &QuadratureOptions::default(), &unit, 0.0, &[1.0], &[0.0])?;
    let want = 3f64.powf(-2.0 / 3.0) * statrs::function::gamma::gamma(1.0 / 3.0);
    let x_err = (v - want).norm();
    Ok(Outcome {
        pass: steady <= STEADY_TOL && x_err <= X_MODE_TOL,
        detail: format!(
            "steady cos(v) max error {steady:.2e} (tol {STEADY_TOL:.0e}); k-mode {:.10} vs {want:.10}, error {x_err:.2e} (tol {X_MODE_TOL:.0e})",
            v.re
        ),
    })
}

fn calibrate_and_validate(spec: &MixedNormSpec, weight: &str) -> kfp_core::Result<(FrozenConstant, Vec<f64>, f64)> {
    let a = CoefficientField::scalar(1, 1.0)?;
    let cfg = SolveConfig::new(closure_grid(33), ESTIMATE_LAMBDA);
    let calib = estimate_corpus(&a, &sources(SEED_A, ESTIMATE_CORPUS), &cfg, spec, weight)?;
    let cap = FrozenConstant::fit(&calib.iter().map(|r| r.ratio).collect::<Vec<_>>(), HEADROOM)?;
    let valid = estimate_corpus(&a, &sources(SEED_B, ESTIMATE_CORPUS), &cfg, spec, weight)?;
    let ratios: Vec<f64> = valid.iter().map(|r| r.ratio).collect();
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    Ok((cap, cap.violations(&ratios), worst))
}

fn l2_estimate() -> kfp_core::Result<Outcome> {
    let spec = MixedNormSpec::lp(1, 2.0);
    let (cap, violations, worst) = calibrate_and_validate(&spec, "unit")?;

    let designed_grid = GridSpec::uniform(1, 0.0, 1.0, 17, PI, 8, PI, 16)?;
    let designed = [Case {
        id: "designed".into(),
        source: cos_v_source(),
    }];
    let deltas = dyadic_deltas(SWEEP_DELTAS);
    let mode = delta_sweep(&deltas, &designed, &SolveConfig::new(designed_grid, 0.0), &spec, "unit")?;

    let corpus: Vec<Case> = sources(SEED_B, SWEEP_CORPUS);
    let full = delta_sweep(&deltas, &corpus, &SolveConfig::new(closure_grid(33), ESTIMATE_LAMBDA), &spec, "unit")?;

    let slope_ok = (mode.fit.slope - DESIGNED_SLOPE).abs() <= DESIGNED_SLOPE_TOL;
    let theta_ok = full.theta().is_finite() && full.theta().abs() <= THETA_MAX;
    Ok(Outcome {
        pass: violations.is_empty() && slope_ok && theta_ok,
        detail: format!(
            "frozen cap {:.4} (fit {:.4}), validation worst {worst:.4}, {} violations; designed-mode slope {:.4} (want {DESIGNED_SLOPE} ± {DESIGNED_SLOPE_TOL}); corpus theta {:.3} (|theta| <= {THETA_MAX})",
            cap.cap,
            cap.fitted,
            violations.len(),
            mode.fit.slope,
            full.theta()
        ),
    })
}

fn weighted_spec() -> MixedNormSpec {
    MixedNormSpec {
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
    }
}

fn mixed_estimate() -> kfp_core::Result<Outcome> {
    let start = Instant::now();
    let spec = weighted_spec();
    let constants = spec.weight.check_constants(&IntervalFamily::default())?;
    let (cap, violations, worst) = calibrate_and_validate(&spec, "t^1/2,v^1/2")?;
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome {
        pass: violations.is_empty() && secs <= MIXED_BUDGET_S,
        detail: format!(
            "weight constants {constants:.4?}; frozen cap {:.4} (fit {:.4}), validation worst {worst:.4}, {} violations, {secs:.1}s (budget {MIXED_BUDGET_S}s)",
            cap.cap,
            cap.fitted,
            violations.len()
        ),
    })
}

fn geometry() -> kfp_core::Result<Outcome> {
    let tri = quasi_metric_run(TRIPLES, 1, SEED_A);
    let sand = ball_sandwich_run(SANDWICH_SAMPLES, 1, SEED_A);
    let dbl = doubling_run(DOUBLING_CONFIGS, DOUBLING_SAMPLES, 1, SEED_A);
    // |B_2r| = 2^{2+4d}|B_r| without the cut; the cut at most doubles it
    let bound = 2f64.powi(3 + 4);
    Ok(Outcome {
        pass: tri.symmetry_violations == 0
            && tri.triangle_violations == 0
            && sand.inner_violations == 0
            && sand.outer_violations == 0
            && dbl.max_ratio <= bound,
        detail: format!(
            "{} triples: {} + {} violations (worst ratios {:.3}, {:.3}); sandwich {} samples ({} in small ball): {} + {} violations; doubling max {:.2} over {DOUBLING_CONFIGS} configs (bound {bound})",
            tri.triples,
            tri.symmetry_violations,
            tri.triangle_violations,
            tri.worst_symmetry,
            tri.worst_triangle,
            sand.samples,
            sand.inner_hits,
            sand.inner_violations,
            sand.outer_violations,
            dbl.max_ratio
        ),
    })
}

fn weights() -> kfp_core::Result<Outcome> {
    let fam = IntervalFamily::default();
    let mut flagged = true;
    for alpha in [1.0, 1.5, -1.0, -1.2] {
        flagged &= !ap_constant_1d(&Weight1D::power(alpha, 0.0, 2.0), 2.0, &fam)?.is_finite();
    }
    let mut drift = 0.0f64;
    for alpha in [-0.5, 0.5] {
        let w = Weight1D::power(alpha, 0.0, 2.0);
        let base = ap_constant_1d(&w, 2.0, &fam)?.value;
        let fine = ap_constant_1d(&w, 2.0, &fam.refined())?.value;
        drift = drift.max((fine - base).abs() / base);
    }
    let mut worst = 0.0f64;
    for i in 0..KINETIC_CONFIGS {
        let mut rng = stream(SEED_A, i);
        let r = rng.random_range(0.1..3.0);
        let z0 = random_point(&mut rng, 1, 10.0);
        let t_cut = if rng.random_bool(0.5) { f64::INFINITY } else { z0.t + rng.random_range(0.0..r * r) };
        let params = KineticApParams {
            alpha: 0.5,
            p: 2.0,
            r,
            z0,
            c: rng.random_range(1.0..10.0),
            t_cut,
            samples: KINETIC_SAMPLES,
        };
        worst = worst.max(kinetic_ap_functional(&params, SEED_A ^ i)?.mean);
    }
    let zero = kinetic_ap_functional(
        &KineticApParams {
            alpha: 0.0,
            p: 2.0,
            r: 1.0,
            z0: PhasePoint::origin(1),
            c: 2.0,
            t_cut: f64::INFINITY,
            samples: KINETIC_SAMPLES,
        },
        SEED_B,
    )?;
    let zero_ok = (zero.mean - 1.0).abs() <= 3.0 * zero.se;
    Ok(Outcome {
        pass: flagged && drift <= AP_STABILITY && worst.is_finite() && worst <= KINETIC_CAP && zero_ok,
        detail: format!(
            "out-of-range powers flagged infinite: {flagged}; dyadic drift {drift:.2e} (tol {AP_STABILITY}); kinetic functional max {worst:.4} over {KINETIC_CONFIGS} configs (cap {KINETIC_CAP}); alpha = 0 gives {} ± {}",
            zero.mean, zero.se
        ),
    })
}

fn maximal_sharp() -> kfp_core::Result<Outcome> {
    let g8 = GridSpec::uniform(1, 0.0, 1.0, 8, 0.5, 8, 2.0, 8)?;
    let mut exact = true;
    for (k, fam) in [
        CylinderFamily::new(0.35, 3, 1.0, None)?,
        CylinderFamily::new(0.3, 2, 2.0, Some(0.6))?,
    ]
    .iter()
    .enumerate()
    {
        let f = band_limited(&g8, 3, SEED_A, k as u64);
        exact &= maximal(&f, fam)?.values == common::maximal_oracle(&f, fam, false);
        exact &= sharp(&f, fam)?.values == common::maximal_oracle(&f, fam, true);
    }

    let g = GridSpec::uniform(1, 0.0, 1.0, 12, 0.2, 12, 1.8, 12)?;
    let norm = MixedNormSpec::lp(1, 2.0);
    let band: Vec<GridField> = (0..2 * HL_CORPUS).map(|i| band_limited(&g, 3, SEED_B, i)).collect();
    let bumps: Vec<GridField> = (0..2 * HL_CORPUS).map(|i| interior_bumps(&g, 3, SEED_B, i)).collect();
    let n = HL_CORPUS as usize;
    let mut lines = Vec::new();
    let mut stable = true;
    for c in [1.0, 4.0] {
        let fam = CylinderFamily::new(0.25, 3, c, None)?;
        let hl = (hl_check(&band[..n], "band", &norm, &fam)?, hl_check(&band, "band", &norm, &fam)?);
        let fs = (fs_check(&bumps[..n], "bumps", &norm, &fam)?, fs_check(&bumps, "bumps", &norm, &fam)?);
        for (name, (half, full)) in [("HL", hl), ("FS", fs)] {
            let growth = full.row.ratio / half.row.ratio - 1.0;
            stable &= half.row.ratio.is_finite() && full.row.ratio.is_finite() && growth <= HL_STABILITY;
            lines.push(format!("{name} c={c}: {:.4} -> {:.4}", half.row.ratio, full.row.ratio));
        }
    }
    Ok(Outcome {
        pass: exact && stable,
        detail: format!(
            "oracle equality on 8^3: {exact}; {} (corpus {HL_CORPUS} -> {}, growth tol {HL_STABILITY})",
            lines.join(", "),
            2 * HL_CORPUS
        ),
    })
}

fn fractional() -> kfp_core::Result<Outcome> {
    let s = 1.0 / 3.0;
    let wide = GridSpec::uniform(1, 0.0, 0.0, 1, 2048.0, 1 << 16, 1.0, 2)?;
    let gauss = |y: f64| (-y * y).exp();
    let u = GridField::from_fn(wide.clone(), |_, x, _| gauss(x[0]));
    let lap = frac_laplacian_x(&u, s)?;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mid = wide.nx[0] / 2;
    for j in 0..10 {
        // probes x = 0, 0.25, ..., 2.25 (node mid + 4j)
        let node = mid + 4 * j;
        let x = wide.x_coord(0, node);
        let oracle = frac_laplacian_singular(|y: &[f64]| gauss(y[0]), &[x], s)?;
        scale = scale.max(oracle.abs());
        worst = worst.max((lap.values[node * wide.nv[0]] - oracle).abs());
    }
    let rel = worst / scale;

    let g = GridSpec::uniform(1, 0.0, 1.0, 5, 4.0, 32, 3.0, 16)?;
    let f = band_limited(&g, 6, SEED_A, 0);
    let twice = frac_laplacian_x(&frac_laplacian_x(&f, 1.0 / 6.0)?, 1.0 / 6.0)?;
    let once = frac_laplacian_x(&f, 1.0 / 3.0)?;
    let semigroup = twice.sub(&once)?.max_abs() / once.max_abs();
    let parseval = (grid_l2(&f) - forward(&f).l2()).abs() / grid_l2(&f);
    Ok(Outcome {
        pass: rel <= ORACLE_TOL && semigroup <= SEMIGROUP_TOL && parseval <= PARSEVAL_TOL,
        detail: format!(
            "multiplier vs singular integral {rel:.2e} (tol {ORACLE_TOL:.0e}, 10 probes, relative to max |value|); semigroup {semigroup:.2e} (tol {SEMIGROUP_TOL:.0e}); Parseval {parseval:.2e} (tol {PARSEVAL_TOL:.0e})"
        ),
    })
}

fn oscillation() -> kfp_core::Result<Outcome> {
    let sampling = OscSampling {
        time_slices: 16,
        pairs_per_slice: 2_000,
        norm: MatrixNorm::EntrywiseMax,
    };
    let time_only = CoefficientField::new(1, CoefficientKind::SmoothVariable(SmoothFamily::TimeSin { eps: 0.5 }), 0.3)?;
    let holder = CoefficientField::new(
        1,
        CoefficientKind::SmoothVariable(SmoothFamily::Holder { eps: 0.5, kappa: 0.5 }),
        0.6,
    )?;
    let mut zero = true;
    let mut excess = f64::NEG_INFINITY;
    let mut varying = 0;
    for i in 0..OSC_CYLINDERS {
        let mut rng = stream(SEED_A, i);
        // centers within 0.05 of the origin keep part of every cylinder
        // below the cap of the Hölder coefficient, so it varies there
        let r = rng.random_range(0.05..0.5);
        let z0 = random_point(&mut rng, 1, 0.05);
        let q = Cylinder::past(z0.clone(), r)?;
        zero &= osc_xv(&time_only, &q, sampling, i)?.mean == 0.0;
        let e = osc_xv(&holder, &q, sampling, i)?;
        // probes at the slice centers the time average runs over
        let probes: Vec<PhasePoint> = (0..sampling.time_slices)
            .map(|k| {
                let t = z0.t - r * r * (k as f64 + 0.5) / sampling.time_slices as f64;
                let s = slice_d(&z0, t, r).unwrap();
                PhasePoint::new(t, s.x_center(), z0.v.clone()).unwrap()
            })
            .collect();
        let p = osc_prime(&holder, r, &probes, sampling.pairs_per_slice, sampling.norm, i + 7)?;
        varying += (e.mean > 0.0) as usize;
        let slack = 3.0 * (e.se * e.se + p.se * p.se).sqrt();
        excess = excess.max(e.mean - p.mean - slack);
    }

    let radii: Vec<f64> = (2..=6).map(|j| 0.5f64.powi(j)).collect();
    let origin = PhasePoint::origin(1);
    let osc: Vec<f64> = radii
        .iter()
        .map(|&r| osc_at_probe(&holder, r, &origin, 200_000, MatrixNorm::EntrywiseMax, SEED_B).mean)
        .collect();
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = osc.iter().map(|o| o.ln()).collect();
    let (slope, _) = kfp_core::coefficients::linear_fit(&lx, &ly);
    let kappa = 0.5;
    let slope_err = (slope - kappa).abs() / kappa;
    Ok(Outcome {
        pass: zero && excess <= 0.0 && varying == OSC_CYLINDERS as usize && slope_err <= HOLDER_SLOPE_TOL,
        detail: format!(
            "t-only coefficient oscillation exactly 0: {zero}; max (osc_xv - osc' - 3 se) over {OSC_CYLINDERS} cylinders ({varying} with nonzero oscillation) {excess:.3e}; Hölder slope {slope:.4} vs kappa {kappa} (rel error {slope_err:.3}, tol {HOLDER_SLOPE_TOL})"
        ),
    })
}

fn random_tail_field(i: u64) -> (TailField, f64) {
    let mut rng = stream(SEED_A, 1000 + i);
    let sigma = rng.random_range(0.3..2.0);
    let f = TailField {
        offset: rng.random_range(-1.0..1.0),
        growth: rng.random_range(0.0..1.0),
        gamma: rng.random_range(0.0..0.5 * sigma),
        bumps: (0..3)
            .map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-20.0..20.0), rng.random_range(0.2..2.0)))
            .collect(),
    };
    (f, sigma)
}

fn tail_and_interpolation() -> kfp_core::Result<Outcome> {
    let mut closed = 0.0f64;
    for sigma in [0.5, 1.0, 2.0] {
        let r = 1.3f64;
        let b = tail_bound_check(&TailField::constant(1.0), sigma, r, 2.0)?;
        let lhs = 2.0 * r.powf(-3.0 * sigma) / sigma;
        let rhs = r.powf(-3.0 * sigma) / (1.0 - 2f64.powf(-3.0 * sigma));
        closed = closed.max((b.lhs - lhs).abs() / lhs).max((b.shell_sum - rhs).abs() / rhs);
        if !b.holds {
            closed = f64::INFINITY;
        }
    }
    let mut holds = 0;
    let mut worst = 0.0f64;
    for i in 0..TAIL_FIELDS {
        let (f, sigma) = random_tail_field(i);
        let b = tail_bound_check(&f, sigma, 1.0, 2.0)?;
        holds += b.holds as usize;
        worst = worst.max(b.ratio / b.explicit_n);
    }

    let g = GridSpec::uniform(1, 0.0, 1.0, 9, 3.0, 16, 4.0, 32)?;
    let spec = weighted_spec();
    let needed = |seed: u64| -> kfp_core::Result<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        for i in 0..INTERP_CORPUS {
            let u = band_limited(&g, 6, seed, i);
            for row in interpolation_check(&u, &INTERP_EPS, &spec)? {
                out.push((row.eps, row.needed));
            }
        }
        Ok(out)
    };
    let calib = needed(SEED_A)?;
    let mut frozen = Vec::new();
    let mut violations = 0;
    let valid = needed(SEED_B)?;
    for eps in INTERP_EPS {
        let fit: Vec<f64> = calib.iter().filter(|r| r.0 == eps).map(|r| r.1).collect();
        let n = FrozenConstant::fit(&fit, HEADROOM)?;
        let check: Vec<f64> = valid.iter().filter(|r| r.0 == eps).map(|r| r.1).collect();
        violations += n.violations(&check).len();
        frozen.push(n.cap);
    }
    Ok(Outcome {
        pass: closed <= 1e-10 && holds == TAIL_FIELDS as usize && violations == 0,
        detail: format!(
            "constant field closed-form error {closed:.2e}; random fields {holds}/{TAIL_FIELDS} within explicit N (worst ratio/N {worst:.3e}); interpolation frozen N {frozen:.4?} for eps {INTERP_EPS:?}, {violations} validation violations"
        ),
    })
}
