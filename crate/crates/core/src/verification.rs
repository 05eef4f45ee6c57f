//! Empirical checks of the a priori estimates: estimate ratios on solver
//! output, δ-sweeps, a localized Caccioppoli inequality and the
//! interpolation inequality, with unnamed constants fitted on one corpus
//! and frozen before they are checked on another.

use rayon::prelude::*;

use crate::coefficients::{linear_fit, CoefficientField};
use crate::error::{invalid, KfpError, Result};
use crate::fractional::{dv_frac_sixth, frac_laplacian_x};
use crate::geometry::{Cylinder, CylinderSide, PhasePoint};
use crate::grid::GridField;
use crate::maximal::contained_nodes;
use crate::norms::{grad_v_magnitude, hess_v_magnitude, magnitude, mixed_norm, transport_derivative_with, MixedNormSpec};
use crate::solver::{solve_duhamel, AnalyticSource, SolveConfig};

/// Time stencil width for `Y u`.
pub const TRANSPORT_WIDTH: usize = 9;

/// Headroom applied to fitted constants before they are frozen.
pub const HEADROOM: f64 = 0.2;

/// The six left-hand terms, `λ` factors included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateTerms {
    pub u: f64,
    pub dv: f64,
    pub d2v: f64,
    pub fracx: f64,
    pub dvfrac: f64,
    pub transport: f64,
}

impl EstimateTerms {
    pub fn sum(&self) -> f64 {
        self.u + self.dv + self.d2v + self.fracx + self.dvfrac + self.transport
    }
}

/// `λ‖u‖, λ^{1/2}‖D_v u‖, ‖D²_v u‖, ‖(-Δ_x)^{1/3} u‖, ‖D_v(-Δ_x)^{1/6} u‖, ‖Y u‖`.
pub fn estimate_terms(u: &GridField, lambda: f64, spec: &MixedNormSpec) -> Result<EstimateTerms> {
    let width = TRANSPORT_WIDTH.min(u.spec.nt);
    Ok(EstimateTerms {
        u: lambda * mixed_norm(u, spec)?,
        dv: lambda.sqrt() * mixed_norm(&grad_v_magnitude(u)?, spec)?,
        d2v: mixed_norm(&hess_v_magnitude(u)?, spec)?,
        fracx: mixed_norm(&frac_laplacian_x(u, 1.0 / 3.0)?, spec)?,
        dvfrac: mixed_norm(&magnitude(&dv_frac_sixth(u))?, spec)?,
        transport: mixed_norm(&transport_derivative_with(u, width)?, spec)?,
    })
}

/// One case of an estimate report.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub case_id: String,
    pub delta: f64,
    pub lambda: f64,
    pub p: f64,
    pub r: Vec<f64>,
    pub q: f64,
    pub weight: String,
    pub terms: EstimateTerms,
    pub rhs: f64,
    pub ratio: f64,
}

impl EstimateRow {
    pub const HEADER: [&'static str; 15] = [
        "case_id",
        "delta",
        "lambda",
        "p",
        "r",
        "q",
        "weight",
        "term_u",
        "term_dv",
        "term_d2v",
        "term_fracx",
        "term_dvfrac",
        "term_transport",
        "rhs",
        "ratio",
    ];

    /// Fields in header order with round-trip float formatting; `r` is
    /// `;`-separated.
    pub fn record(&self) -> Vec<String> {
        let t = &self.terms;
        let r: Vec<String> = self.r.iter().map(|x| x.to_string()).collect();
        vec![
            self.case_id.clone(),
            self.delta.to_string(),
            self.lambda.to_string(),
            self.p.to_string(),
            r.join(";"),
            self.q.to_string(),
            self.weight.clone(),
            t.u.to_string(),
            t.dv.to_string(),
            t.d2v.to_string(),
            t.fracx.to_string(),
            t.dvfrac.to_string(),
            t.transport.to_string(),
            self.rhs.to_string(),
            self.ratio.to_string(),
        ]
    }

    /// The stored ratio agrees with the stored norms.
    pub fn is_consistent(&self) -> bool {
        (self.terms.sum() / self.rhs - self.ratio).abs() <= 1e-12 * self.ratio.abs().max(1.0)
    }
}

/// Labels attached to an estimate row.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseMeta {
    pub case_id: String,
    pub delta: f64,
    pub weight: String,
}

/// Ratio of the left-hand terms to `‖f‖`. `None` when `u` vanishes.
pub fn estimate_ratio(meta: &CaseMeta, u: &GridField, f: &GridField, lambda: f64, spec: &MixedNormSpec) -> Result<Option<EstimateRow>> {
    u.check_same_grid(f)?;
    spec.validate(u.spec.d)?;
    let rhs = mixed_norm(f, spec)?;
    if rhs == 0.0 {
        return Err(invalid("f", "right-hand side has zero norm"));
    }
    if u.values.iter().all(|v| *v == 0.0) {
        return Ok(None);
    }
    let terms = estimate_terms(u, lambda, spec)?;
    let ratio = terms.sum() / rhs;
    if !ratio.is_finite() {
        return Err(KfpError::Invariant {
            id: "estimate_terms_finite",
            detail: format!("case {}: {terms:?}", meta.case_id),
        });
    }
    Ok(Some(EstimateRow {
        case_id: meta.case_id.clone(),
        delta: meta.delta,
        lambda,
        p: spec.p,
        r: spec.r.clone(),
        q: spec.q,
        weight: meta.weight.clone(),
        terms,
        rhs,
        ratio,
    }))
}

/// A source together with its label.
#[derive(Debug, Clone)]
pub struct Case {
    pub id: String,
    pub source: AnalyticSource,
}

/// Solve every case with coefficient `a` and compute its row, in parallel
/// over cases. Rows come back in case order.
pub fn estimate_corpus(
    a: &CoefficientField,
    cases: &[Case],
    cfg: &SolveConfig,
    spec: &MixedNormSpec,
    weight: &str,
) -> Result<Vec<EstimateRow>> {
    if cases.is_empty() {
        return Err(invalid("corpus", "is empty"));
    }
    let rows = cases
        .par_iter()
        .map(|c| {
            let u = solve_duhamel(a, &c.source, cfg)?;
            let f = c.source.sample(&cfg.grid)?;
            let meta = CaseMeta {
                case_id: c.id.clone(),
                delta: a.delta,
                weight: weight.to_string(),
            };
            estimate_ratio(&meta, &u, &f, cfg.lambda, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Log-log fit of the worst-case ratio against a swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFit {
    pub xs: Vec<f64>,
    pub worst: Vec<f64>,
    /// Slope of `log worst` against `log x`.
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
}

impl PowerFit {
    pub fn new(xs: Vec<f64>, worst: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != worst.len() {
            return Err(invalid("sweep", "need at least two matching points"));
        }
        if worst.iter().chain(&xs).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("sweep", "values must be positive and finite"));
        }
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = worst.iter().map(|y| y.ln()).collect();
        let (slope, intercept) = linear_fit(&lx, &ly);
        let residual = (lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (y - slope * x - intercept).powi(2))
            .sum::<f64>()
            / lx.len() as f64)
            .sqrt();
        Ok(Self {
            xs,
            worst,
            slope,
            intercept,
            residual,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DeltaSweep {
    pub rows: Vec<EstimateRow>,
    pub fit: PowerFit,
}

impl DeltaSweep {
    /// Growth exponent `θ̂`: worst ratio `∝ δ^{-θ̂}`.
    pub fn theta(&self) -> f64 {
        -self.fit.slope
    }
}

/// `δ = 1, 1/2, …, 2^{-(n-1)}`.
pub fn dyadic_deltas(n: usize) -> Vec<f64> {
    (0..n).map(|j| 0.5f64.powi(j as i32)).collect()
}

/// Run [`estimate_corpus`] with `a = δ I` for each `δ` and fit the worst
/// ratio against `δ`.
pub fn delta_sweep(deltas: &[f64], cases: &[Case], cfg: &SolveConfig, spec: &MixedNormSpec, weight: &str) -> Result<DeltaSweep> {
    if deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
        return Err(invalid("delta", "sweep values must lie in (0, 1]"));
    }
    let mut rows = Vec::new();
    let mut worst = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let a = CoefficientField::scalar(cfg.grid.d, delta)?;
        let r = estimate_corpus(&a, cases, cfg, spec, weight)?;
        worst.push(r.iter().map(|r| r.ratio).fold(0.0, f64::max));
        rows.extend(r);
    }
    let fit = PowerFit::new(deltas.to_vec(), worst)?;
    Ok(DeltaSweep { rows, fit })
}

/// Same protocol as [`delta_sweep`] over `λ` at fixed `a`.
pub fn lambda_sweep(a: &CoefficientField, lambdas: &[f64], cases: &[Case], cfg: &SolveConfig, spec: &MixedNormSpec, weight: &str) -> Result<(Vec<EstimateRow>, PowerFit)> {
    let mut rows = Vec::new();
    let mut worst = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut c = cfg.clone();
        c.lambda = lambda;
        let r = estimate_corpus(a, cases, &c, spec, weight)?;
        worst.push(r.iter().map(|r| r.ratio).fold(0.0, f64::max));
        rows.extend(r);
    }
    let fit = PowerFit::new(lambdas.to_vec(), worst)?;
    Ok((rows, fit))
}

/// A constant fitted on a calibration corpus, inflated by the headroom and
/// then held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenConstant {
    pub fitted: f64,
    pub cap: f64,
}

impl FrozenConstant {
    /// Freeze `max(values)·(1 + headroom)`.
    pub fn fit(values: &[f64], headroom: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("calibration", "no values to fit"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("calibration", "non-finite value"));
        }
        let fitted = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        Ok(Self {
            fitted,
            cap: fitted * (1.0 + headroom),
        })
    }

    /// Values above the cap.
    pub fn violations(&self, values: &[f64]) -> Vec<f64> {
        values.iter().cloned().filter(|v| !(*v <= self.cap)).collect()
    }
}

/// `L_2` norm over the grid nodes inside `q`, with the grid cell volume.
pub fn cylinder_l2(g: &GridField, q: &Cylinder) -> f64 {
    let mut nodes = Vec::new();
    contained_nodes(&g.spec, q, &mut nodes);
    let cell = g.spec.dt() * g.spec.cell_xv();
    (nodes.iter().map(|&i| g.values[i] * g.values[i]).sum::<f64>() * cell).sqrt()
}

/// Two nested past cylinders at a common center.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedCylinders {
    pub center: PhasePoint,
    pub r1: f64,
    pub r2: f64,
    pub big_r1: f64,
    pub big_r2: f64,
}

impl NestedCylinders {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.r1 && self.r1 < self.r2 && 0.0 < self.big_r1 && self.big_r1 < self.big_r2) {
            return Err(invalid(
                "radii",
                format!(
                    "need 0 < r1 < r2 and 0 < R1 < R2, got r = ({}, {}), R = ({}, {})",
                    self.r1, self.r2, self.big_r1, self.big_r2
                ),
            ));
        }
        Ok(())
    }

    fn inner(&self) -> Result<Cylinder> {
        Cylinder::new(self.center.clone(), self.r1, self.big_r1, CylinderSide::Past)
    }

    fn outer(&self) -> Result<Cylinder> {
        Cylinder::new(self.center.clone(), self.r2, self.big_r2, CylinderSide::Past)
    }
}

/// Both sides of the localized estimate
/// `δ^{-2}(r2-r1)^{-1}‖D_v u‖_{Q1} + ‖D²_v u‖_{Q1}
///   ≤ N [δ^{-1}‖f‖_{Q2} + δ^{-4}((r2-r1)^{-2} + r2 (R2-R1)^{-3}) ‖u‖_{Q2}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaccioppoliRow {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; 0 when both vanish.
    pub ratio: f64,
}

pub fn caccioppoli_check(u: &GridField, f: &GridField, delta: f64, cyl: &NestedCylinders) -> Result<CaccioppoliRow> {
    cyl.validate()?;
    u.check_same_grid(f)?;
    let (q1, q2) = (cyl.inner()?, cyl.outer()?);
    let dv = grad_v_magnitude(u)?;
    let d2v = hess_v_magnitude(u)?;
    let gap = cyl.r2 - cyl.r1;
    let lhs = cylinder_l2(&dv, &q1) / (delta * delta * gap) + cylinder_l2(&d2v, &q1);
    let spread = gap.powi(-2) + cyl.r2 * (cyl.big_r2 - cyl.big_r1).powi(-3);
    let rhs = cylinder_l2(f, &q2) / delta + spread * cylinder_l2(u, &q2) / delta.powi(4);
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(CaccioppoliRow { lhs, rhs, ratio })
}

/// Norms entering `‖D_v u‖ ≤ ε‖D²_v u‖ + N ε^{-1} ‖u‖` in a mixed norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationRow {
    pub eps: f64,
    pub du: f64,
    pub d2u: f64,
    pub u: f64,
    /// Smallest `N ≥ 0` making the inequality hold.
    pub needed: f64,
}

impl InterpolationRow {
    pub fn holds(&self, n: f64) -> bool {
        self.du <= self.eps * self.d2u + n * self.u / self.eps
    }
}

/// Interpolation between `u` and `D²_v u` for each `ε`, in the velocity
/// variables of `spec` with their weights.
pub fn interpolation_check(u: &GridField, eps: &[f64], spec: &MixedNormSpec) -> Result<Vec<InterpolationRow>> {
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(invalid("eps", "must be positive"));
    }
    let du = mixed_norm(&grad_v_magnitude(u)?, spec)?;
    let d2u = mixed_norm(&hess_v_magnitude(u)?, spec)?;
    let un = mixed_norm(u, spec)?;
    Ok(eps
        .iter()
        .map(|&e| {
            let needed = if un > 0.0 { (e * (du - e * d2u) / un).max(0.0) } else { 0.0 };
            InterpolationRow {
                eps: e,
                du,
                d2u,
                u: un,
                needed,
            }
        })
        .collect())
}
