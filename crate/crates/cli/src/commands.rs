use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use kfp_core::coefficients::{measure_r0, osc_at_probe, probe_lattice, MatrixNorm};
use kfp_core::corpus::{band_limited, interior_bumps, SourceCorpus};
use kfp_core::geometry::{ball_sandwich_run, doubling_run, quasi_metric_run, random_point};
use kfp_core::maximal::{fs_check, hl_check, RatioRow};
use kfp_core::norms::MixedNormSpec;
use kfp_core::rng::stream;
use kfp_core::solver::{solve_duhamel, SolveConfig};
use kfp_core::verification::{delta_sweep, estimate_corpus, lambda_sweep, Case, EstimateRow, PowerFit};
use kfp_core::weights::{ap_constant_1d, kinetic_ap_functional, KineticApParams, Weight1D};
use kfp_core::GridField;

use crate::config::{Config, VerifySection};
use crate::failure::Failure;

pub struct Context {
    pub out: PathBuf,
    pub seed: u64,
    pub dry_run: bool,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    s.as_ref()
        .ok_or_else(|| Failure::config("config.missing_section", format!("no [{name}] table")))
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn norm_or_l2(norm: &Option<MixedNormSpec>, d: usize) -> Result<MixedNormSpec, Failure> {
    let n = norm.clone().unwrap_or_else(|| MixedNormSpec::lp(d, 2.0));
    n.validate(d)?;
    Ok(n)
}

/// Largest `|u|` on the middle time slice.
pub fn center_slice_max(u: &GridField) -> f64 {
    let it = u.spec.nt / 2;
    u.slab(it).iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn solve(cfg: &Config, ctx: &Context) -> Result<(), Failure> {
    let s = section(&cfg.solve, "solve")?;
    s.grid.validate()?;
    s.quadrature.validate()?;
    let a = s.coefficient.build(s.grid.d)?;
    s.source.validate()?;
    let mut sc = SolveConfig::new(s.grid.clone(), s.lambda);
    sc.quad = s.quadrature;
    sc.validate()?;
    let path = ctx.path(&s.output);
    if ctx.dry_run {
        println!(
            "plan: solve d={} grid {:?} x {:?} x {:?}, {} source terms, lambda {} -> {}",
            s.grid.d,
            s.grid.nt,
            s.grid.nx,
            s.grid.nv,
            s.source.terms.len(),
            s.lambda,
            path.display()
        );
        return Ok(());
    }
    let start = Instant::now();
    let u = solve_duhamel(&a, &s.source, &sc)?;
    if !u.values.iter().all(|x| x.is_finite()) {
        return Err(Failure::invariant("solve.finite", "solution has non-finite values"));
    }
    u.save(&path)?;
    println!(
        "solved in {:.2}s; center slice max |u| = {}; wrote {}",
        start.elapsed().as_secs_f64(),
        center_slice_max(&u),
        path.display()
    );
    Ok(())
}

fn verify_cases(v: &VerifySection, seed: u64) -> Result<Vec<Case>, Failure> {
    let mut cases: Vec<Case> = v
        .corpus
        .cases
        .iter()
        .map(|c| Case {
            id: c.id.clone(),
            source: c.source.clone(),
        })
        .collect();
    if v.corpus.standard > 0 && v.grid.d != 1 {
        return Err(Failure::config("corpus.standard", "the standard corpus is one-dimensional"));
    }
    let corpus = SourceCorpus::standard();
    cases.extend((0..v.corpus.standard).map(|i| Case {
        id: format!("standard-{i}"),
        source: corpus.sample(v.grid.lx, seed, i),
    }));
    if cases.is_empty() {
        return Err(Failure::config("corpus.empty", "no cases and no standard sources"));
    }
    for c in &cases {
        c.source.validate()?;
    }
    Ok(cases)
}

fn fit_record(sweep: &str, f: &PowerFit) -> Vec<String> {
    vec![sweep.into(), f.slope.to_string(), f.intercept.to_string(), f.residual.to_string()]
}

pub fn verify_estimate(cfg: &Config, ctx: &Context) -> Result<(), Failure> {
    let v = section(&cfg.verify_estimate, "verify_estimate")?;
    v.grid.validate()?;
    let d = v.grid.d;
    let a = v.coefficient.build(d)?;
    let norm = norm_or_l2(&v.norm, d)?;
    let cases = verify_cases(v, ctx.seed)?;
    let sc = SolveConfig::new(v.grid.clone(), v.lambda);
    sc.validate()?;
    if ctx.dry_run {
        println!(
            "plan: verify-estimate {} cases, lambda {}, {} delta and {} lambda sweep points -> estimate.csv, fits.csv",
            cases.len(),
            v.lambda,
            v.deltas.len(),
            v.lambdas.len()
        );
        return Ok(());
    }
    let mut rows = estimate_corpus(&a, &cases, &sc, &norm, &v.weight_id)?;
    let mut fits = Vec::new();
    if !v.deltas.is_empty() {
        let s = delta_sweep(&v.deltas, &cases, &sc, &norm, &v.weight_id)?;
        println!("delta sweep: theta {}", s.theta());
        fits.push(fit_record("delta", &s.fit));
        rows.extend(s.rows);
    }
    if !v.lambdas.is_empty() {
        let (r, f) = lambda_sweep(&a, &v.lambdas, &cases, &sc, &norm, &v.weight_id)?;
        println!("lambda sweep: slope {}", f.slope);
        fits.push(fit_record("lambda", &f));
        rows.extend(r);
    }
    write_csv(&ctx.path("estimate.csv"), EstimateRow::HEADER, rows.iter().map(EstimateRow::record))?;
    write_csv(&ctx.path("fits.csv"), ["sweep", "slope", "intercept", "residual"], fits)?;
    if let Some(r) = rows.iter().find(|r| !r.is_consistent()) {
        return Err(Failure::invariant("estimate.ratio_consistent", format!("case {}", r.case_id)));
    }
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    println!("{} rows, worst ratio {worst}", rows.len());
    if let Some(cap) = v.cap {
        let over = rows.iter().filter(|r| r.ratio > cap).count();
        if over > 0 {
            return Err(Failure::invariant("estimate.frozen_cap", format!("{over} rows above cap {cap}, worst {worst}")));
        }
    }
    Ok(())
}

pub fn geometry_test(cfg: &Config, ctx: &Context) -> Result<(), Failure> {
    let g = cfg.geometry_test.clone().unwrap_or_default();
    if !(1..=3).contains(&g.d) {
        return Err(Failure::config("param.d", "expected 1..=3"));
    }
    if ctx.dry_run {
        println!(
            "plan: geometry-test d={} with {} triples, {} sandwich samples, {} doubling configurations -> geometry.csv",
            g.d, g.triples, g.sandwich, g.doubling_configs
        );
        return Ok(());
    }
    let tri = quasi_metric_run(g.triples, g.d, ctx.seed);
    println!(
        "quasi-metric: checked {} triples, {} symmetry and {} triangle violations",
        tri.triples, tri.symmetry_violations, tri.triangle_violations
    );
    let sand = ball_sandwich_run(g.sandwich, g.d, ctx.seed);
    println!(
        "ball sandwich: checked {} samples ({} in the small ball), {} inner and {} outer violations",
        sand.samples, sand.inner_hits, sand.inner_violations, sand.outer_violations
    );
    let dbl = doubling_run(g.doubling_configs, g.doubling_samples, g.d, ctx.seed);
    let bound = 2f64.powi(3 + 4 * g.d as i32);
    println!("doubling: {} configurations, max ratio {} (bound {bound})", dbl.ratios.len(), dbl.max_ratio);
    let rows = vec![
        vec!["symmetry".into(), tri.triples.to_string(), tri.symmetry_violations.to_string(), tri.worst_symmetry.to_string()],
        vec!["triangle".into(), tri.triples.to_string(), tri.triangle_violations.to_string(), tri.worst_triangle.to_string()],
        vec!["sandwich_inner".into(), sand.samples.to_string(), sand.inner_violations.to_string(), sand.inner_hits.to_string()],
        vec!["sandwich_outer".into(), sand.samples.to_string(), sand.outer_violations.to_string(), String::new()],
        vec!["doubling".into(), dbl.ratios.len().to_string(), ((dbl.max_ratio > bound) as usize).to_string(), dbl.max_ratio.to_string()],
    ];
    write_csv(&ctx.path("geometry.csv"), ["check", "samples", "violations", "extreme"], rows)?;
    if tri.symmetry_violations > 0 {
        return Err(Failure::invariant("quasi_metric.symmetry", format!("{} violations", tri.symmetry_violations)));
    }
    if tri.triangle_violations > 0 {
        return Err(Failure::invariant("quasi_metric.triangle", format!("{} violations", tri.triangle_violations)));
    }
    if sand.inner_violations + sand.outer_violations > 0 {
        return Err(Failure::invariant("ball_sandwich", format!("{sand:?}")));
    }
    if dbl.max_ratio > bound {
        return Err(Failure::invariant("doubling.bound", format!("{} > {bound}", dbl.max_ratio)));
    }
    Ok(())
}

pub fn weights_ap(cfg: &Config, ctx: &Context) -> Result<(), Failure> {
    let w = section(&cfg.weights_ap, "weights_ap")?;
    if w.alphas.is_empty() || w.classes.iter().any(|&p| !(p > 1.0)) {
        return Err(Failure::config("weights.list", "need at least one alpha and classes p > 1"));
    }
    if let Some(k) = &w.kinetic {
        if !(k.p > 1.0) || k.samples == 0 {
            return Err(Failure::config("weights.kinetic", "need p > 1 and samples > 0"));
        }
    }
    if ctx.dry_run {
        println!(
            "plan: weights-ap {} exponents x {} classes, kinetic functional: {} -> ap.csv",
            w.alphas.len(),
            w.classes.len(),
            w.kinetic.as_ref().map_or(0, |k| k.configs)
        );
        return Ok(());
    }
    let fine = w.family.refined();
    let mut rows = Vec::new();
    for &p in &w.classes {
        for &alpha in &w.alphas {
            let wt = Weight1D::power(alpha, 0.0, p);
            let base = ap_constant_1d(&wt, p, &w.family)?;
            let refined = ap_constant_1d(&wt, p, &fine)?;
            rows.push(vec![
                alpha.to_string(),
                p.to_string(),
                base.value.to_string(),
                refined.value.to_string(),
                base.center.to_string(),
                base.radius.to_string(),
            ]);
        }
    }
    write_csv(&ctx.path("ap.csv"), ["alpha", "p", "value", "refined", "center", "radius"], rows)?;
    if let Some(k) = &w.kinetic {
        let mut rows = Vec::new();
        for i in 0..k.configs {
            let mut rng = stream(ctx.seed, i);
            let r = rng.random_range(0.1..3.0);
            let z0 = random_point(&mut rng, 1, 10.0);
            let t_cut = if rng.random_bool(0.5) { f64::INFINITY } else { z0.t + rng.random_range(0.0..r * r) };
            let params = KineticApParams {
                alpha: k.alpha,
                p: k.p,
                r,
                z0,
                c: rng.random_range(1.0..10.0),
                t_cut,
                samples: k.samples,
            };
            let e = kinetic_ap_functional(&params, ctx.seed ^ i)?;
            rows.push(vec![
                i.to_string(),
                r.to_string(),
                params.c.to_string(),
                t_cut.to_string(),
                e.mean.to_string(),
                e.se.to_string(),
            ]);
        }
        write_csv(&ctx.path("kinetic_ap.csv"), ["config", "r", "c", "t_cut", "value", "se"], rows)?;
    }
    Ok(())
}

pub fn maximal_bench(cfg: &Config, ctx: &Context) -> Result<(), Failure> {
    let m = section(&cfg.maximal_bench, "maximal_bench")?;
    m.grid.validate()?;
    m.family.validate()?;
    let norm = norm_or_l2(&m.norm, m.grid.d)?;
    if m.fields == 0 {
        return Err(Failure::config("corpus.empty", "fields must be positive"));
    }
    let count = m.family.count(&m.grid);
    if ctx.dry_run {
        println!(
            "plan: maximal-bench {} fields per corpus, {count} cylinders per field -> maximal.csv, timing.txt",
            m.fields
        );
        return Ok(());
    }
    let band: Vec<GridField> = (0..m.fields).map(|i| band_limited(&m.grid, m.max_mode, ctx.seed, i)).collect();
    let bumps: Vec<GridField> = (0..m.fields).map(|i| interior_bumps(&m.grid, m.bumps, ctx.seed, i)).collect();
    let start = Instant::now();
    let hl = hl_check(&band, "band_limited", &norm, &m.family)?;
    let t_hl = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let fs = fs_check(&bumps, "interior_bumps", &norm, &m.family)?;
    let t_fs = start.elapsed().as_secs_f64();
    write_csv(&ctx.path("maximal.csv"), RatioRow::HEADER, [hl.row.record(), fs.row.record()])?;
    let timing = format!(
        "cylinders {count}\nhl_seconds {t_hl:.3}\nfs_seconds {t_fs:.3}\nper_field_seconds {:.4}\n",
        (t_hl + t_fs) / (2 * m.fields) as f64
    );
    std::fs::write(ctx.path("timing.txt"), &timing)?;
    print!("{timing}");
    for (id, c) in [("maximal.hl_finite", &hl), ("maximal.fs_finite", &fs)] {
        if !c.row.ratio.is_finite() {
            return Err(Failure::invariant(id, format!("ratio {}", c.row.ratio)));
        }
    }
    println!("HL ratio {}, FS ratio {}", hl.row.ratio, fs.row.ratio);
    Ok(())
}

pub fn vmo(cfg: &Config, ctx: &Context) -> Result<(), Failure> {
    let s = section(&cfg.vmo, "vmo")?;
    let a = s.coefficient.build(s.d)?;
    if s.radii.is_empty() || s.radii.iter().any(|&r| !(r > 0.0)) || s.samples == 0 {
        return Err(Failure::config("vmo.radii", "need positive radii and samples"));
    }
    let probes = probe_lattice(s.d, s.probes.t, s.probes.h, s.probes.m);
    if ctx.dry_run {
        println!(
            "plan: vmo {} radii x {} probes, {} thresholds -> vmo.csv",
            s.radii.len(),
            probes.len(),
            s.gamma0.len()
        );
        return Ok(());
    }
    let mut rows = Vec::new();
    for &r in &s.radii {
        let mut worst = 0.0f64;
        let mut se = 0.0;
        for z in &probes {
            let e = osc_at_probe(&a, r, z, s.samples, MatrixNorm::EntrywiseMax, ctx.seed);
            if e.mean >= worst {
                worst = e.mean;
                se = e.se;
            }
        }
        if !worst.is_finite() {
            return Err(Failure::invariant("vmo.finite", format!("r = {r}")));
        }
        rows.push(vec![r.to_string(), worst.to_string(), se.to_string()]);
    }
    write_csv(&ctx.path("vmo.csv"), ["r", "osc_prime", "se"], rows)?;
    if !s.gamma0.is_empty() {
        let mut rows = Vec::new();
        for &g in &s.gamma0 {
            let r0 = measure_r0(&a, g, &probes, s.samples, ctx.seed, s.r_range.0, s.r_range.1, s.iters)?;
            rows.push(vec![g.to_string(), r0.to_string()]);
        }
        write_csv(&ctx.path("r0.csv"), ["gamma0", "r0"], rows)?;
    }
    Ok(())
}

pub fn report(cfg: &Config, ctx: &Context) -> Result<(), Failure> {
    let r = section(&cfg.report, "report")?;
    if r.inputs.is_empty() {
        return Err(Failure::config("report.inputs", "no input files"));
    }
    let paths: Vec<PathBuf> = r
        .inputs
        .iter()
        .map(|p| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                ctx.out.join(p)
            }
        })
        .collect();
    if ctx.dry_run {
        println!("plan: report over {} files -> summary.csv", paths.len());
        return Ok(());
    }
    let mut rows = Vec::new();
    for p in &paths {
        let mut rd = csv::Reader::from_path(p)?;
        let ratio_col = rd.headers()?.iter().position(|h| h == "ratio");
        let mut n = 0usize;
        let mut worst = f64::NEG_INFINITY;
        for rec in rd.records() {
            let rec = rec?;
            n += 1;
            if let Some(c) = ratio_col {
                let x: f64 = rec[c]
                    .parse()
                    .map_err(|_| Failure::config("report.parse", format!("{}: bad ratio {}", p.display(), &rec[c])))?;
                worst = worst.max(x);
            }
        }
        let worst = if ratio_col.is_some() && n > 0 { worst.to_string() } else { String::new() };
        rows.push(vec![p.display().to_string(), n.to_string(), worst]);
    }
    write_csv(&ctx.path("summary.csv"), ["file", "rows", "max_ratio"], rows)
}
