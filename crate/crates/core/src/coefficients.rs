//! Diffusion coefficient families, lower-order terms, ellipticity checks and
//! the `(x, v)`-oscillation functionals.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, KfpError, Result};
use crate::geometry::{Cylinder, CylinderSide, PhasePoint};
use crate::rng::{stream, KfpRng};

pub type MatrixFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Closed-form variable coefficients.
#[derive(Clone)]
pub enum SmoothFamily {
    /// `I (1 + ε sin v_1)`.
    SinV { eps: f64 },
    /// `I (1 + ε min(|v_1|^κ + |x_1|^{κ/3}, 1))`, Hölder of order `κ` in the
    /// kinetic scaling.
    Holder { eps: f64, kappa: f64 },
    /// `I (1 + ε sin t)`, independent of `(x, v)`.
    TimeSin { eps: f64 },
    Custom(MatrixFn),
}

impl fmt::Debug for SmoothFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SinV { eps } => write!(f, "SinV {{ eps: {eps} }}"),
            Self::Holder { eps, kappa } => write!(f, "Holder {{ eps: {eps}, kappa: {kappa} }}"),
            Self::TimeSin { eps } => write!(f, "TimeSin {{ eps: {eps} }}"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CoefficientKind {
    ConstantSpd(DMatrix<f64>),
    /// `matrices[0]` on `(-∞, b_0)`, `matrices[i]` on `[b_{i-1}, b_i)`, the
    /// last one on `[b_last, ∞)`.
    TimePiecewise {
        breakpoints: Vec<f64>,
        matrices: Vec<DMatrix<f64>>,
    },
    SmoothVariable(SmoothFamily),
    /// `λ_v P_v + μ_2 (1+|v|)^{-1} (I - P_v)` where `P_v` projects on `v`
    /// and `λ_v` blends from `μ_2 (1+|v|)^{-1}` near the origin to
    /// `μ_1 (1+|v|)^{-3}` at infinity with weight `|v|²/(1+|v|²)`.
    LandauLike { mu1: f64, mu2: f64 },
}

/// Diffusion matrix `a(z)` with declared ellipticity `δ`.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub d: usize,
    pub kind: CoefficientKind,
    pub delta: f64,
}

/// One constant piece `[start, end)` of a time-only coefficient.
#[derive(Debug, Clone)]
pub struct TimePiece {
    pub start: f64,
    pub end: f64,
    pub a: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(invalid("a", "matrix must be square"));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(invalid("a", format!("asymmetric entry ({i},{j}): {a} vs {b}")));
            }
        }
    }
    Ok(())
}

impl CoefficientField {
    pub fn new(d: usize, kind: CoefficientKind, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(invalid("delta", format!("expected (0, 1], got {delta}")));
        }
        let check = |m: &DMatrix<f64>| -> Result<()> {
            if m.nrows() != d {
                return Err(KfpError::DimensionMismatch {
                    expected: d,
                    found: m.nrows(),
                });
            }
            check_symmetric(m)
        };
        match &kind {
            CoefficientKind::ConstantSpd(m) => check(m)?,
            CoefficientKind::TimePiecewise {
                breakpoints,
                matrices,
            } => {
                if matrices.len() != breakpoints.len() + 1 {
                    return Err(invalid("matrices", "need one more matrix than breakpoints"));
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("breakpoints", "must be strictly increasing"));
                }
                for m in matrices {
                    check(m)?;
                }
            }
            CoefficientKind::LandauLike { mu1, mu2 } => {
                if !(*mu1 > 0.0 && *mu2 > 0.0) {
                    return Err(invalid("mu", "mu1, mu2 must be positive"));
                }
            }
            CoefficientKind::SmoothVariable(SmoothFamily::Holder { kappa, .. }) => {
                if !(*kappa > 0.0 && *kappa <= 1.0) {
                    return Err(invalid("kappa", "expected (0, 1]"));
                }
            }
            CoefficientKind::SmoothVariable(_) => {}
        }
        Ok(Self { d, kind, delta })
    }

    /// `a = s I`.
    pub fn scalar(d: usize, s: f64) -> Result<Self> {
        let delta = s.min(1.0 / s).min(1.0);
        Self::new(d, CoefficientKind::ConstantSpd(DMatrix::identity(d, d) * s), delta)
    }

    pub fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> DMatrix<f64> {
        let d = self.d;
        let id = || DMatrix::<f64>::identity(d, d);
        match &self.kind {
            CoefficientKind::ConstantSpd(m) => m.clone(),
            CoefficientKind::TimePiecewise {
                breakpoints,
                matrices,
            } => {
                let i = breakpoints.partition_point(|&b| b <= t);
                matrices[i].clone()
            }
            CoefficientKind::SmoothVariable(f) => match f {
                SmoothFamily::SinV { eps } => id() * (1.0 + eps * v[0].sin()),
                SmoothFamily::Holder { eps, kappa } => {
                    let h = (v[0].abs().powf(*kappa) + x[0].abs().powf(kappa / 3.0)).min(1.0);
                    id() * (1.0 + eps * h)
                }
                SmoothFamily::TimeSin { eps } => id() * (1.0 + eps * t.sin()),
                SmoothFamily::Custom(g) => g(t, x, v),
            },
            CoefficientKind::LandauLike { mu1, mu2 } => {
                let n2: f64 = v.iter().map(|a| a * a).sum();
                let n = n2.sqrt();
                let trans = mu2 / (1.0 + n);
                let s = n2 / (1.0 + n2);
                let along = (1.0 - s) * trans + s * mu1 / (1.0 + n).powi(3);
                let mut m = id() * trans;
                if n > 0.0 {
                    for i in 0..d {
                        for j in 0..d {
                            m[(i, j)] += (along - trans) * v[i] * v[j] / n2;
                        }
                    }
                } else {
                    m = id() * along;
                }
                m
            }
        }
    }

    /// Constant pieces for coefficients depending on `t` only.
    pub fn time_pieces(&self) -> Result<Vec<TimePiece>> {
        match &self.kind {
            CoefficientKind::ConstantSpd(m) => Ok(vec![TimePiece {
                start: f64::NEG_INFINITY,
                end: f64::INFINITY,
                a: m.clone(),
            }]),
            CoefficientKind::TimePiecewise {
                breakpoints,
                matrices,
            } => {
                let mut out = Vec::with_capacity(matrices.len());
                for (i, m) in matrices.iter().enumerate() {
                    let start = if i == 0 { f64::NEG_INFINITY } else { breakpoints[i - 1] };
                    let end = breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
                    out.push(TimePiece {
                        start,
                        end,
                        a: m.clone(),
                    });
                }
                Ok(out)
            }
            _ => Err(KfpError::Unsupported(
                "the exact solver needs coefficients independent of (x, v) and piecewise constant in t".into(),
            )),
        }
    }

    /// True when `a` does not depend on `(x, v)`.
    pub fn is_xv_independent(&self) -> bool {
        matches!(
            self.kind,
            CoefficientKind::ConstantSpd(_)
                | CoefficientKind::TimePiecewise { .. }
                | CoefficientKind::SmoothVariable(SmoothFamily::TimeSin { .. })
        )
    }

    /// `c · a` with the same declared `δ`.
    pub fn scaled(&self, c: f64) -> Self {
        let base = self.clone();
        let kind = CoefficientKind::SmoothVariable(SmoothFamily::Custom(Arc::new(move |t, x, v| {
            base.eval(t, x, v) * c
        })));
        Self {
            d: self.d,
            kind,
            delta: self.delta,
        }
    }

    /// `a + g(t)` with a time-only symmetric matrix function `g`.
    pub fn plus_time_only(&self, g: Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>) -> Self {
        let base = self.clone();
        let kind = CoefficientKind::SmoothVariable(SmoothFamily::Custom(Arc::new(move |t, x, v| {
            base.eval(t, x, v) + g(t)
        })));
        Self {
            d: self.d,
            kind,
            delta: self.delta,
        }
    }
}

/// Scalar data `c(z)` or vector data `b(z)`.
#[derive(Clone, Default)]
pub enum ScalarField {
    #[default]
    Zero,
    Constant(f64),
    Custom(ScalarFn),
}

#[derive(Clone, Default)]
pub enum VectorField {
    #[default]
    Zero,
    Constant(Vec<f64>),
    Custom(VectorFn),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c:?})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl ScalarField {
    pub fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Custom(g) => g(t, x, v),
        }
    }
}

impl VectorField {
    pub fn eval(&self, d: usize, t: f64, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; d],
            Self::Constant(b) => b.clone(),
            Self::Custom(g) => g(t, x, v),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}

/// Lower-order data `b^i D_{v_i} u + c u + λ u` with the declared bound
/// `|b| + |c| ≤ L`.
#[derive(Debug, Clone, Default)]
pub struct LowerOrderTerms {
    pub b: VectorField,
    pub c: ScalarField,
    pub bound: f64,
    pub lambda: f64,
}

impl LowerOrderTerms {
    pub fn lambda_only(lambda: f64) -> Self {
        Self {
            lambda,
            ..Default::default()
        }
    }

    /// Largest sampled `|b| + |c|` over uniform points of `[-half, half]^{1+2d}`.
    pub fn sampled_bound(&self, d: usize, half: f64, samples: usize, rng: &mut KfpRng) -> f64 {
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let t = rng.random_range(-half..half);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-half..half)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-half..half)).collect();
            let b = self.b.eval(d, t, &x, &v);
            let nb = b.iter().map(|a| a * a).sum::<f64>().sqrt();
            worst = worst.max(nb + self.c.eval(t, &x, &v).abs());
        }
        worst
    }

    pub fn check_bound(&self, d: usize, half: f64, samples: usize, rng: &mut KfpRng) -> bool {
        self.sampled_bound(d, half, samples, rng) <= self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityReport {
    pub pass: bool,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Extreme Rayleigh quotients `ξ^T a(z) ξ / |ξ|²` over random `z` in
/// `[-half, half]^{1+2d}`; the extremes over `ξ` are the eigenvalues.
pub fn ellipticity_check(a: &CoefficientField, samples: usize, half: f64, rng: &mut KfpRng) -> Result<EllipticityReport> {
    if samples == 0 {
        return Err(invalid("samples", "must be >= 1"));
    }
    let d = a.d;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..samples {
        let t = rng.random_range(-half..half);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-half..half)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-half..half)).collect();
        let (l, h) = extreme_eigenvalues(&a.eval(t, &x, &v))?;
        lo = lo.min(l);
        hi = hi.max(h);
    }
    let tol = 1e-12;
    Ok(EllipticityReport {
        pass: lo >= a.delta * (1.0 - tol) && hi <= (1.0 + tol) / a.delta,
        min_ratio: lo,
        max_ratio: hi,
    })
}

pub fn extreme_eigenvalues(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_symmetric(m)?;
    let e = SymmetricEigen::new(m.clone());
    let lo = e.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = e.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MatrixNorm {
    #[default]
    EntrywiseMax,
    Frobenius,
}

impl MatrixNorm {
    pub fn diff(self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        match self {
            Self::EntrywiseMax => a.iter().zip(b.iter()).fold(0.0, |m, (p, q)| m.max((p - q).abs())),
            Self::Frobenius => a.iter().zip(b.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

/// Monte Carlo estimate with standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OscSampling {
    pub time_slices: usize,
    pub pairs_per_slice: usize,
    pub norm: MatrixNorm,
}

impl Default for OscSampling {
    fn default() -> Self {
        Self {
            time_slices: 32,
            pairs_per_slice: 10_000,
            norm: MatrixNorm::EntrywiseMax,
        }
    }
}

fn uniform_in_ball(rng: &mut KfpRng, center: &[f64], radius: f64, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for (o, _) in out.iter_mut().zip(center) {
            *o = rng.random_range(-1.0..1.0);
            n2 += *o * *o;
        }
        if n2 < 1.0 {
            break;
        }
    }
    for (o, c) in out.iter_mut().zip(center) {
        *o = c + radius * *o;
    }
}

fn mean_se(sum: f64, sum2: f64, n: usize) -> Estimate {
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0);
    Estimate {
        mean,
        se: (var / (nf - 1.0).max(1.0)).sqrt(),
    }
}

/// Averaged oscillation of `a` in `(x, v)` over the past cylinder `Q_r(z_0)`.
pub fn osc_xv(a: &CoefficientField, q: &Cylinder, sampling: OscSampling, seed: u64) -> Result<Estimate> {
    if q.side != CylinderSide::Past || (q.r - q.big_r).abs() > 1e-15 * q.r {
        return Err(invalid("cylinder", "expected a past cylinder with R = r"));
    }
    if q.dim() != a.d {
        return Err(KfpError::DimensionMismatch {
            expected: a.d,
            found: q.dim(),
        });
    }
    if sampling.time_slices == 0 || sampling.pairs_per_slice == 0 {
        return Err(invalid("sampling", "counts must be positive"));
    }
    let z0 = &q.center;
    let r = q.r;
    let slices = sampling.time_slices;
    let parts: Vec<(f64, f64, usize)> = (0..slices)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let d = a.d;
            let (mut x1, mut x2, mut v1, mut v2) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..sampling.pairs_per_slice {
                let u: f64 = rng.random();
                let dt = -r * r * (i as f64 + u) / slices as f64;
                let t = z0.t + dt;
                let xc: Vec<f64> = (0..d).map(|j| z0.x[j] - dt * z0.v[j]).collect();
                uniform_in_ball(&mut rng, &xc, r.powi(3), &mut x1);
                uniform_in_ball(&mut rng, &xc, r.powi(3), &mut x2);
                uniform_in_ball(&mut rng, &z0.v, r, &mut v1);
                uniform_in_ball(&mut rng, &z0.v, r, &mut v2);
                let o = sampling.norm.diff(&a.eval(t, &x1, &v1), &a.eval(t, &x2, &v2));
                s += o;
                s2 += o * o;
            }
            (s, s2, sampling.pairs_per_slice)
        })
        .collect();
    let (s, s2, n) = parts
        .into_iter()
        .fold((0.0, 0.0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    Ok(mean_se(s, s2, n))
}

/// Per-probe oscillation average over `x_1, x_2 ∈ B_{r³}(x)`, `v_1, v_2 ∈ B_r(v)`.
/// The same seed yields the same uniforms for every `r` (common random numbers).
pub fn osc_at_probe(a: &CoefficientField, r: f64, probe: &PhasePoint, samples: usize, norm: MatrixNorm, seed: u64) -> Estimate {
    let d = a.d;
    let mut rng = crate::rng::seeded(seed);
    let zero = vec![0.0; d];
    let (mut x1, mut x2, mut v1, mut v2) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let (mut s, mut s2) = (0.0, 0.0);
    let shift = |u: &mut [f64], c: &[f64], rad: f64| {
        for (a, b) in u.iter_mut().zip(c) {
            *a = b + rad * *a;
        }
    };
    for _ in 0..samples {
        uniform_in_ball(&mut rng, &zero, 1.0, &mut x1);
        uniform_in_ball(&mut rng, &zero, 1.0, &mut x2);
        uniform_in_ball(&mut rng, &zero, 1.0, &mut v1);
        uniform_in_ball(&mut rng, &zero, 1.0, &mut v2);
        shift(&mut x1, &probe.x, r.powi(3));
        shift(&mut x2, &probe.x, r.powi(3));
        shift(&mut v1, &probe.v, r);
        shift(&mut v2, &probe.v, r);
        let o = norm.diff(&a.eval(probe.t, &x1, &v1), &a.eval(probe.t, &x2, &v2));
        s += o;
        s2 += o * o;
    }
    mean_se(s, s2, samples.max(1))
}

/// Supremum over `probes` of [`osc_at_probe`]; returns the estimate at the
/// maximizing probe.
pub fn osc_prime(a: &CoefficientField, r: f64, probes: &[PhasePoint], samples: usize, norm: MatrixNorm, seed: u64) -> Result<Estimate> {
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    if probes.is_empty() {
        return Err(invalid("probes", "empty probe set"));
    }
    let ests: Vec<Estimate> = probes
        .par_iter()
        .enumerate()
        .map(|(i, p)| osc_at_probe(a, r, p, samples, norm, seed.wrapping_add(i as u64)))
        .collect();
    Ok(ests
        .into_iter()
        .fold(Estimate { mean: -1.0, se: 0.0 }, |m, e| if e.mean > m.mean { e } else { m }))
}

/// Lattice of probes `{t} × {j h}^d × {j h}^d`, `|j| ≤ m`; contains the origin.
pub fn probe_lattice(d: usize, t: f64, h: f64, m: i64) -> Vec<PhasePoint> {
    let pts: Vec<f64> = (-m..=m).map(|j| j as f64 * h).collect();
    let mut out = Vec::new();
    let total = pts.len().pow(2 * d as u32);
    for mut idx in 0..total {
        let mut c = Vec::with_capacity(2 * d);
        for _ in 0..2 * d {
            c.push(pts[idx % pts.len()]);
            idx /= pts.len();
        }
        out.push(PhasePoint {
            t,
            x: c[..d].to_vec(),
            v: c[d..].to_vec(),
        });
    }
    out
}

/// Largest `r` on `[r_lo, r_hi]` with `osc'(a, r) ≤ γ_0`, by bisection in
/// `log r` using common random numbers.
pub fn measure_r0(
    a: &CoefficientField,
    gamma0: f64,
    probes: &[PhasePoint],
    samples: usize,
    seed: u64,
    r_lo: f64,
    r_hi: f64,
    iters: usize,
) -> Result<f64> {
    let osc = |r: f64| osc_prime(a, r, probes, samples, MatrixNorm::EntrywiseMax, seed).map(|e| e.mean);
    if osc(r_lo)? > gamma0 {
        return Err(invalid("r_lo", "oscillation already above threshold"));
    }
    if osc(r_hi)? <= gamma0 {
        return Ok(r_hi);
    }
    let (mut lo, mut hi) = (r_lo.ln(), r_hi.ln());
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if osc(mid.exp())? <= gamma0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
