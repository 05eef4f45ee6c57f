//! Exact-in-Fourier solver for `∂_t u - v·D_x u - a(t):D²_v u + λu = f` with
//! coefficients depending on `t` only.
//!
//! In Fourier variables the equation reads
//! `∂_t û + k·∇_ξ û + ξ^T a ξ û + λ û = f̂`, whose characteristics give
//!
//! ```text
//! û(t,k,ξ) = ∫_{-∞}^t e^{-λ(t-t')} exp(-∫_{t'}^t (ξ+k(s-t))^T a(s) (ξ+k(s-t)) ds) f̂(t', k, ξ+k(t'-t)) dt'.
//! ```

mod operator;
mod source;

pub use operator::{apply_operator, apply_operator_with, relative_residual, scaling_conjugation_check, ScalingReport};
pub use source::{AnalyticMode, AnalyticSource, Envelope, Normalization, SourceTerm, TimeProfile};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, TimePiece};
use crate::error::{invalid, KfpError, Result};
use crate::grid::{GridField, GridSpec};
use crate::quadrature::GaussLegendre;
use crate::spectral::{self, Mode, SpectralField};

/// Quadrature settings for the history integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureOptions {
    /// Kernel exponent beyond which the history is dropped.
    pub e_max: f64,
    /// Gauss-Legendre nodes per panel.
    pub order: usize,
    /// Panel length as a fraction of the smallest local scale.
    pub panel_fraction: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            e_max: 40.0,
            order: 8,
            panel_fraction: 0.5,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_max > 0.0) {
            return Err(invalid("e_max", "must be positive"));
        }
        if self.order < 4 {
            return Err(invalid("order", "quadrature order must be >= 4"));
        }
        if !(self.panel_fraction > 0.0) {
            return Err(invalid("panel_fraction", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub lambda: f64,
    pub quad: QuadratureOptions,
    pub grid: GridSpec,
    /// Fill `(-k, -ξ)` from `(k, ξ)` by conjugation.
    pub hermitian: bool,
    /// Lower limit of the history integral (Cauchy problems).
    pub start: Option<f64>,
    /// Allow trigonometric interpolation in `ξ` for gridded sources.
    pub interpolate_grid_source: bool,
}

impl SolveConfig {
    pub fn new(grid: GridSpec, lambda: f64) -> Self {
        Self {
            lambda,
            quad: QuadratureOptions::default(),
            grid,
            hermitian: true,
            start: None,
            interpolate_grid_source: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.quad.validate()?;
        if !(self.lambda >= 0.0) {
            return Err(invalid("lambda", "must be >= 0"));
        }
        if self.grid.d > 2 {
            return Err(invalid("d", "the solver supports d <= 2"));
        }
        Ok(())
    }
}

/// Source restricted to one `x`-frequency.
pub trait ModeSource: Sync {
    fn value(&self, t: f64, eta: &[f64]) -> Complex64;
    /// Closed interval outside which the source vanishes.
    fn support(&self) -> (f64, f64);
    /// Points where the source is not smooth in `t`.
    fn breakpoints(&self) -> Vec<f64>;
    /// Length scale of variation in `t` at fixed `η`.
    fn time_scale(&self) -> f64;
    /// Length scale of variation in `η`.
    fn frequency_scale(&self) -> f64;
    /// A sum of time profile times `η`-factor, when available.
    fn separable(&self) -> Option<&AnalyticMode> {
        None
    }
}

struct AnalyticModeSource<'a> {
    mode: AnalyticMode,
    support: (f64, f64),
    breaks: &'a [f64],
}

impl ModeSource for AnalyticModeSource<'_> {
    fn value(&self, t: f64, eta: &[f64]) -> Complex64 {
        self.mode.value(t, eta)
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.to_vec()
    }
    fn time_scale(&self) -> f64 {
        self.mode.time_scale()
    }
    fn frequency_scale(&self) -> f64 {
        self.mode.frequency_scale()
    }
    fn separable(&self) -> Option<&AnalyticMode> {
        Some(&self.mode)
    }
}

/// A mode source given by a closure, for single-mode experiments.
pub struct FnModeSource<F: Fn(f64, &[f64]) -> Complex64 + Sync> {
    pub f: F,
    pub support: (f64, f64),
    pub breaks: Vec<f64>,
    pub time_scale: f64,
    pub frequency_scale: f64,
}

impl<F: Fn(f64, &[f64]) -> Complex64 + Sync> ModeSource for FnModeSource<F> {
    fn value(&self, t: f64, eta: &[f64]) -> Complex64 {
        (self.f)(t, eta)
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
    fn time_scale(&self) -> f64 {
        self.time_scale
    }
    fn frequency_scale(&self) -> f64 {
        self.frequency_scale
    }
}

/// `(α, β, γ) = (ξ^T A ξ, k^T A ξ, k^T A k)` on one constant piece.
#[derive(Debug, Clone, Copy)]
struct PieceForms {
    start: f64,
    end: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

/// Exponent `λ(t - t') + ∫_{t'}^t q(s) ds` of the Duhamel kernel for a fixed
/// `(k, ξ, t)`.
struct Kernel {
    pieces: Vec<PieceForms>,
    lambda: f64,
    t: f64,
}

impl Kernel {
    fn new(pieces: &[TimePiece], lambda: f64, t: f64, k: &[f64], xi: &[f64]) -> Self {
        let d = k.len();
        let forms = pieces
            .iter()
            .map(|p| {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..d {
                    for j in 0..d {
                        let a = p.a[(i, j)];
                        alpha += xi[i] * a * xi[j];
                        beta += k[i] * a * xi[j];
                        gamma += k[i] * a * k[j];
                    }
                }
                PieceForms {
                    start: p.start,
                    end: p.end,
                    alpha,
                    beta,
                    gamma,
                }
            })
            .collect();
        Self {
            pieces: forms,
            lambda,
            t,
        }
    }

    /// `∫_{σ0}^{σ1} (ξ + kσ)^T A (ξ + kσ) dσ` with `σ = s - t`.
    fn piece_integral(p: &PieceForms, s0: f64, s1: f64) -> f64 {
        p.alpha * (s1 - s0) + p.beta * (s1 * s1 - s0 * s0) + p.gamma * (s1.powi(3) - s0.powi(3)) / 3.0
    }

    fn exponent(&self, tp: f64) -> f64 {
        let mut e = self.lambda * (self.t - tp);
        for p in &self.pieces {
            let lo = p.start.max(tp);
            let hi = p.end.min(self.t);
            if hi > lo {
                e += Self::piece_integral(p, lo - self.t, hi - self.t);
            }
        }
        e
    }

    /// Smallest `τ ≥ 0` with `exponent(t - τ) ≥ e_max`, capped at `cap`.
    fn horizon(&self, e_max: f64, cap: f64) -> f64 {
        if self.exponent(self.t - cap) < e_max {
            return cap;
        }
        let (mut lo, mut hi) = (0.0, cap);
        if !cap.is_finite() {
            hi = 1.0;
            while self.exponent(self.t - hi) < e_max {
                hi *= 2.0;
                if hi > 1e12 {
                    return f64::INFINITY;
                }
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.exponent(self.t - mid) < e_max {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi.max(1.0) {
                break;
            }
        }
        hi
    }

    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().flat_map(|p| [p.start, p.end]).filter(|b| b.is_finite())
    }
}

/// Smallest ellipticity among the pieces (lower eigenvalue).
fn min_eigenvalue(pieces: &[TimePiece]) -> f64 {
    pieces
        .iter()
        .map(|p| crate::coefficients::extreme_eigenvalues(&p.a).map(|e| e.0).unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

struct ModeContext<'a> {
    pieces: &'a [TimePiece],
    delta: f64,
    lambda: f64,
    quad: QuadratureOptions,
    rule: &'a GaussLegendre,
    start: Option<f64>,
}

impl ModeContext<'_> {
    /// Smallest local scale of the history integrand.
    fn scale(&self, src: &dyn ModeSource, k: &[f64], xi: &[f64]) -> f64 {
        let kn = k.iter().map(|a| a * a).sum::<f64>().sqrt();
        let xn = xi.iter().map(|a| a * a).sum::<f64>().sqrt();
        let decay = 1.0 / (self.delta * xn * xn + self.lambda + 1.0);
        let cubic = if kn > 0.0 {
            (3.0 / (self.delta.max(1e-300) * kn * kn)).cbrt()
        } else {
            f64::INFINITY
        };
        let slide = if kn > 0.0 { src.frequency_scale() / kn } else { f64::INFINITY };
        decay.min(cubic).min(slide).min(src.time_scale())
    }

    /// All output times at once for a constant coefficient and a source that
    /// is smooth in `t`: with `τ = t - t'` the kernel and the `η`-factor
    /// depend on `τ` alone, so one set of nodes in `τ` serves every `t`.
    fn solve_times(&self, src: &dyn ModeSource, times: &[f64], k: &[f64], xi: &[f64]) -> Option<Result<Vec<Complex64>>> {
        if self.pieces.len() != 1 || self.start.is_some() || times.is_empty() {
            return None;
        }
        let mode = src.separable()?;
        let profiles = mode.smooth_profiles()?;
        let mut groups: Vec<&TimeProfile> = Vec::new();
        let group_of: Vec<usize> = profiles
            .iter()
            .map(|p| match groups.iter().position(|g| g == p) {
                Some(i) => i,
                None => {
                    groups.push(p);
                    groups.len() - 1
                }
            })
            .collect();

        let nt = times.len();
        let (t_first, t_last) = (times[0], times[nt - 1]);
        let (s_lo, s_hi) = src.support();
        let kernel = Kernel::new(self.pieces, self.lambda, 0.0, k, xi);
        let tau_lo = (t_first - s_hi).max(0.0);
        let tau_hi = kernel.horizon(self.quad.e_max, t_last - s_lo);
        if !tau_hi.is_finite() && k.iter().all(|&a| a == 0.0) && mode.vanishes_at(xi) {
            return Some(Ok(vec![Complex64::default(); nt]));
        }
        if !tau_hi.is_finite() {
            return Some(Err(KfpError::Unsupported(
                "history integral does not decay: need λ > 0, a nonzero frequency or a source bounded in time".into(),
            )));
        }
        if tau_hi <= tau_lo {
            return Some(Ok(vec![Complex64::default(); nt]));
        }
        let h = (self.quad.panel_fraction * self.scale(src, k, xi)).max(1e-9 * (tau_hi - tau_lo));
        let panels = ((tau_hi - tau_lo) / h).ceil().max(1.0) as usize;
        let ph = (tau_hi - tau_lo) / panels as f64;

        let d = k.len();
        let mut eta = [0.0; 3];
        let mut nodes = Vec::with_capacity(panels * self.rule.nodes.len());
        let mut g = vec![Vec::with_capacity(nodes.capacity()); groups.len()];
        for p in 0..panels {
            let c = tau_lo + (p as f64 + 0.5) * ph;
            for (x, wt) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let tau = c + 0.5 * ph * x;
                for j in 0..d {
                    eta[j] = xi[j] - k[j] * tau;
                }
                let w = (-kernel.exponent(-tau)).exp() * wt * 0.5 * ph;
                nodes.push(tau);
                for gi in g.iter_mut() {
                    gi.push(Complex64::default());
                }
                for (i, &gi) in group_of.iter().enumerate() {
                    *g[gi].last_mut().unwrap() += mode.eta_factor(i, &eta[..d]) * w;
                }
            }
        }
        let out = times
            .iter()
            .map(|&t| {
                let mut acc = Complex64::default();
                for (prof, gv) in groups.iter().zip(&g) {
                    for (tau, gq) in nodes.iter().zip(gv) {
                        let s = t - tau;
                        if s >= s_lo && s <= s_hi {
                            acc += gq * prof.eval(s);
                        }
                    }
                }
                acc
            })
            .collect();
        Some(Ok(out))
    }

    fn solve(&self, src: &dyn ModeSource, t: f64, k: &[f64], xi: &[f64]) -> Result<Complex64> {
        let kernel = Kernel::new(self.pieces, self.lambda, t, k, xi);
        let (s_lo, s_hi) = src.support();
        let mut lo_bound = s_lo;
        if let Some(s) = self.start {
            lo_bound = lo_bound.max(s);
        }
        let hi = t.min(s_hi);
        if hi <= lo_bound {
            return Ok(Complex64::default());
        }
        let tau = kernel.horizon(self.quad.e_max, t - lo_bound);
        let frozen = k.iter().all(|&a| a == 0.0);
        if !tau.is_finite() && frozen && src.separable().is_some_and(|m| m.vanishes_at(xi)) {
            return Ok(Complex64::default());
        }
        if !tau.is_finite() {
            return Err(KfpError::Unsupported(
                "history integral does not decay: need λ > 0, a nonzero frequency or a source bounded in time".into(),
            ));
        }
        let lo = (t - tau).max(lo_bound);
        if hi <= lo {
            return Ok(Complex64::default());
        }

        let h = (self.quad.panel_fraction * self.scale(src, k, xi)).max(1e-9 * (hi - lo));

        let mut cuts: Vec<f64> = vec![lo, hi];
        cuts.extend(src.breakpoints().into_iter().chain(kernel.breakpoints()).filter(|&b| b > lo && b < hi));
        cuts.sort_by(f64::total_cmp);

        let d = k.len();
        let mut eta = [0.0; 3];
        let mut acc = Complex64::default();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let panels = ((b - a) / h).ceil().max(1.0) as usize;
            let ph = (b - a) / panels as f64;
            for p in 0..panels {
                let p0 = a + p as f64 * ph;
                let (c, half) = (p0 + 0.5 * ph, 0.5 * ph);
                for (x, wt) in self.rule.nodes.iter().zip(&self.rule.weights) {
                    let tp = c + half * x;
                    for j in 0..d {
                        eta[j] = xi[j] + k[j] * (tp - t);
                    }
                    let e = kernel.exponent(tp);
                    acc += src.value(tp, &eta[..d]) * ((-e).exp() * wt * half);
                }
            }
        }
        Ok(acc)
    }
}

/// Duhamel integral for a single frequency pair `(k, ξ)` at time `t`.
pub fn solve_mode(
    a: &CoefficientField,
    lambda: f64,
    quad: &QuadratureOptions,
    src: &dyn ModeSource,
    t: f64,
    k: &[f64],
    xi: &[f64],
) -> Result<Complex64> {
    quad.validate()?;
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", "must be >= 0"));
    }
    let pieces = a.time_pieces()?;
    let rule = GaussLegendre::new(quad.order);
    let ctx = ModeContext {
        pieces: &pieces,
        delta: min_eigenvalue(&pieces),
        lambda,
        quad: *quad,
        rule: &rule,
        start: None,
    };
    ctx.solve(src, t, k, xi)
}

fn mirror_index(spec: &GridSpec, s: usize) -> usize {
    let d = spec.d;
    let mut xi = vec![0; d];
    let mut vi = vec![0; d];
    spec.split_spatial(s, &mut xi, &mut vi);
    for a in 0..d {
        xi[a] = (spec.nx[a] - xi[a]) % spec.nx[a];
        vi[a] = (spec.nv[a] - vi[a]) % spec.nv[a];
    }
    spec.spatial_index(&xi, &vi)
}

fn nyquist_mode(m: &Mode) -> bool {
    m.any_nyquist()
}

/// Assemble coefficients on the grid from a per-`k` source factory.
fn assemble<'s, F>(a: &CoefficientField, cfg: &SolveConfig, make: F) -> Result<GridField>
where
    F: Fn(&[f64]) -> Box<dyn ModeSource + 's> + Sync,
{
    cfg.validate()?;
    if a.d != cfg.grid.d {
        return Err(KfpError::DimensionMismatch {
            expected: cfg.grid.d,
            found: a.d,
        });
    }
    let pieces = a.time_pieces()?;
    let rule = GaussLegendre::new(cfg.quad.order);
    let ctx = ModeContext {
        pieces: &pieces,
        delta: min_eigenvalue(&pieces),
        lambda: cfg.lambda,
        quad: cfg.quad,
        rule: &rule,
        start: cfg.start,
    };
    let spec = &cfg.grid;
    let modes = spectral::modes(spec);
    let slab = spec.slab_len();
    let times = spec.times();

    // Group modes by x-index so the source factory runs once per k.
    let nvt = spec.nv_total();
    let nxt = spec.nx_total();
    let columns: Vec<Result<Vec<(usize, Vec<Complex64>)>>> = (0..nxt)
        .into_par_iter()
        .map(|ix| {
            let base = ix * nvt;
            let m0 = &modes[base];
            if m0.k_nyquist.iter().any(|&b| b) {
                return Ok(vec![]);
            }
            let src = make(&m0.k);
            let mut out = Vec::new();
            for iv in 0..nvt {
                let s = base + iv;
                if cfg.hermitian && mirror_index(spec, s) < s {
                    continue;
                }
                let m = &modes[s];
                if nyquist_mode(m) {
                    continue;
                }
                let vals = match ctx.solve_times(src.as_ref(), &times, &m.k, &m.xi) {
                    Some(v) => v?,
                    None => times
                        .iter()
                        .map(|&t| ctx.solve(src.as_ref(), t, &m.k, &m.xi))
                        .collect::<Result<Vec<_>>>()?,
                };
                out.push((s, vals));
            }
            Ok(out)
        })
        .collect();

    let mut coeffs = vec![Complex64::default(); spec.len()];
    for col in columns {
        for (s, vals) in col? {
            let mirror = mirror_index(spec, s);
            for (it, c) in vals.into_iter().enumerate() {
                coeffs[it * slab + s] = c;
                if cfg.hermitian && mirror != s {
                    coeffs[it * slab + mirror] = c.conj();
                }
            }
        }
    }
    Ok(spectral::inverse(&SpectralField {
        spec: spec.clone(),
        coeffs,
    }))
}

/// Solve `P_0 u + λu = f` on the grid of `cfg` for an analytic source.
pub fn solve_duhamel(a: &CoefficientField, f: &AnalyticSource, cfg: &SolveConfig) -> Result<GridField> {
    f.validate()?;
    if f.d != cfg.grid.d {
        return Err(KfpError::DimensionMismatch {
            expected: cfg.grid.d,
            found: f.d,
        });
    }
    f.check_lattice(&cfg.grid)?;
    if f.terms.is_empty() {
        cfg.validate()?;
        return Ok(GridField::zeros(cfg.grid.clone()));
    }
    let support = f.support(cfg.quad.e_max);
    let breaks = f.breakpoints();
    let norm = Normalization::Box {
        lx: cfg.grid.lx,
        lv: cfg.grid.lv,
    };
    assemble(a, cfg, |k| {
        Box::new(AnalyticModeSource {
            mode: f.at_k(k, norm),
            support,
            breaks: &breaks,
        })
    })
}

/// Gridded source: `x`-coefficients per time node, trigonometric interpolation
/// in `ξ` and cubic Lagrange interpolation in `t`; zero outside the window.
struct GridModeSource {
    times: Vec<f64>,
    /// `lines[it][iv]`: x-coefficient at this `k` on the v-grid, times `1/N_v`.
    lines: Vec<Vec<Complex64>>,
    v_nodes: Vec<Vec<f64>>,
    nv: Vec<usize>,
}

impl GridModeSource {
    fn at_node(&self, it: usize, eta: &[f64]) -> Complex64 {
        let d = self.nv.len();
        let mut acc = Complex64::default();
        let mut idx = vec![0usize; d];
        for (flat, c) in self.lines[it].iter().enumerate() {
            let mut r = flat;
            for a in (0..d).rev() {
                idx[a] = r % self.nv[a];
                r /= self.nv[a];
            }
            let ph: f64 = (0..d).map(|a| eta[a] * self.v_nodes[a][idx[a]]).sum();
            acc += c * Complex64::from_polar(1.0, -ph);
        }
        acc
    }
}

impl ModeSource for GridModeSource {
    fn value(&self, t: f64, eta: &[f64]) -> Complex64 {
        let n = self.times.len();
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        if t < t0 || t > t1 {
            return Complex64::default();
        }
        if n == 1 {
            return self.at_node(0, eta);
        }
        let h = (t1 - t0) / (n - 1) as f64;
        let w = 4.min(n);
        let i = (((t - t0) / h).floor() as usize).min(n - 1);
        let start = (i + 1).saturating_sub(w / 2).min(n - w);
        let mut acc = Complex64::default();
        for j in 0..w {
            let tj = self.times[start + j];
            let mut l = 1.0;
            for m in 0..w {
                if m != j {
                    l *= (t - self.times[start + m]) / (tj - self.times[start + m]);
                }
            }
            if l != 0.0 {
                acc += self.at_node(start + j, eta) * l;
            }
        }
        acc
    }
    fn support(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.times.clone()
    }
    fn time_scale(&self) -> f64 {
        f64::INFINITY
    }
    fn frequency_scale(&self) -> f64 {
        let l = self.v_nodes.iter().map(|n| n[0].abs()).fold(0.0, f64::max);
        1.0 / l.max(1e-300)
    }
}

/// Solve with a gridded source living on `cfg.grid`; the source is taken to
/// vanish outside its time window.
pub fn solve_duhamel_grid(a: &CoefficientField, f: &GridField, cfg: &SolveConfig) -> Result<GridField> {
    f.check_same_grid(&GridField::zeros(cfg.grid.clone()))?;
    let spec = &cfg.grid;
    let xlines = spectral::forward_x(f);
    let nvt = spec.nv_total();
    let nt = spec.nt;
    let slab = spec.slab_len();
    let scale = 1.0 / nvt as f64;
    let v_nodes: Vec<Vec<f64>> = (0..spec.d).map(|a| spec.v_coords(a)).collect();
    let times = spec.times();
    let modes = spectral::modes(spec);
    let max_coeff = xlines.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    if !cfg.interpolate_grid_source {
        for it in 0..nt {
            for ix in 0..spec.nx_total() {
                if modes[ix * nvt].k.iter().any(|&k| k != 0.0) {
                    let base = it * slab + ix * nvt;
                    if xlines[base..base + nvt].iter().any(|c| c.norm() > 1e-14 * max_coeff) {
                        return Err(KfpError::Unsupported(
                            "gridded source with x-dependence needs off-lattice frequencies; enable interpolation".into(),
                        ));
                    }
                }
            }
        }
    }
    assemble(a, cfg, |k| {
        let ix = modes
            .iter()
            .step_by(nvt)
            .position(|m| m.k.iter().zip(k).all(|(a, b)| a == b))
            .unwrap_or(0);
        let lines = (0..nt)
            .map(|it| {
                let base = it * slab + ix * nvt;
                xlines[base..base + nvt].iter().map(|c| c * scale).collect()
            })
            .collect();
        Box::new(GridModeSource {
            times: times.clone(),
            lines,
            v_nodes: v_nodes.clone(),
            nv: spec.nv.clone(),
        })
    })
}

/// Solve on `[S, T]` with zero data at `t = S`. The source must vanish
/// before `S`; the history integral starts at `S`.
pub fn cauchy_solve(a: &CoefficientField, lambda: f64, f: &AnalyticSource, grid: &GridSpec, quad: QuadratureOptions) -> Result<GridField> {
    let s = grid.t_lo;
    if !f.terms.is_empty() {
        let (lo, _) = f.support(quad.e_max);
        if lo < s - 1e-12 * s.abs().max(1.0) {
            return Err(invalid("source", format!("source support starts at {lo}, before S = {s}")));
        }
    }
    let mut cfg = SolveConfig::new(grid.clone(), lambda);
    cfg.quad = quad;
    cfg.start = Some(s);
    solve_duhamel(a, f, &cfg)
}
