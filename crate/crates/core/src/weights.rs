//! Muckenhoupt weights on the line, product weights in `(t, v)` and the
//! kinetic `A_p` functional of `|x|^α`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::Estimate;
use crate::error::{invalid, KfpError, Result};
use crate::geometry::{sample_two_sided_box, symmetrized_distance_raw, PhasePoint, QuasiMetricParams};
use crate::quadrature::GaussLegendre;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Constant,
    /// `|s - center|^alpha`.
    Power { alpha: f64, center: f64 },
    /// `levels[i]` on `[breaks[i-1], breaks[i])`, with `levels.len() == breaks.len() + 1`.
    Step { breaks: Vec<f64>, levels: Vec<f64> },
    /// Piecewise linear through `(nodes, values)`, constant beyond the ends.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

/// A weight on the line together with its exponent class `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeight", into = "RawWeight")]
pub struct Weight1D {
    pub kind: WeightKind,
    pub class: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeight {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    breaks: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

impl TryFrom<RawWeight> for Weight1D {
    type Error = KfpError;
    fn try_from(r: RawWeight) -> Result<Self> {
        let need = |o: Option<Vec<f64>>, name: &'static str| o.ok_or_else(|| invalid(name, "missing"));
        let kind = match r.kind.as_str() {
            "constant" => WeightKind::Constant,
            "power" => WeightKind::Power {
                alpha: r.alpha.ok_or_else(|| invalid("alpha", "missing"))?,
                center: r.center.unwrap_or(0.0),
            },
            "step" => WeightKind::Step {
                breaks: need(r.breaks, "breaks")?,
                levels: need(r.levels, "levels")?,
            },
            "tabulated" => WeightKind::Tabulated {
                nodes: need(r.nodes, "nodes")?,
                values: need(r.values, "values")?,
            },
            other => return Err(invalid("kind", format!("unknown weight kind `{other}`"))),
        };
        let w = Weight1D {
            kind,
            class: r.class.unwrap_or(2.0),
        };
        w.validate()?;
        Ok(w)
    }
}

impl From<Weight1D> for RawWeight {
    fn from(w: Weight1D) -> Self {
        let mut r = RawWeight {
            class: Some(w.class),
            ..Default::default()
        };
        match w.kind {
            WeightKind::Constant => r.kind = "constant".into(),
            WeightKind::Power { alpha, center } => {
                r.kind = "power".into();
                r.alpha = Some(alpha);
                r.center = Some(center);
            }
            WeightKind::Step { breaks, levels } => {
                r.kind = "step".into();
                r.breaks = Some(breaks);
                r.levels = Some(levels);
            }
            WeightKind::Tabulated { nodes, values } => {
                r.kind = "tabulated".into();
                r.nodes = Some(nodes);
                r.values = Some(values);
            }
        }
        r
    }
}

fn sorted(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl Weight1D {
    pub fn constant() -> Self {
        Self {
            kind: WeightKind::Constant,
            class: 2.0,
        }
    }

    pub fn power(alpha: f64, center: f64, class: f64) -> Self {
        Self {
            kind: WeightKind::Power { alpha, center },
            class,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.class > 1.0) {
            return Err(invalid("class", "exponent class must be > 1"));
        }
        match &self.kind {
            WeightKind::Constant => {}
            WeightKind::Power { alpha, center } => {
                if !alpha.is_finite() || !center.is_finite() {
                    return Err(invalid("alpha", "must be finite"));
                }
            }
            WeightKind::Step { breaks, levels } => {
                if levels.len() != breaks.len() + 1 || !sorted(breaks) {
                    return Err(invalid("levels", "need sorted breaks and one more level than breaks"));
                }
                if levels.iter().any(|l| !(*l > 0.0)) {
                    return Err(invalid("levels", "levels must be positive"));
                }
            }
            WeightKind::Tabulated { nodes, values } => {
                if nodes.is_empty() || nodes.len() != values.len() || !sorted(nodes) {
                    return Err(invalid("nodes", "need sorted nodes with one value each"));
                }
                if values.iter().any(|l| !(*l > 0.0)) {
                    return Err(invalid("values", "values must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            WeightKind::Constant => 1.0,
            WeightKind::Power { alpha, center } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    (s - center).abs().powf(*alpha)
                }
            }
            WeightKind::Step { breaks, levels } => levels[breaks.partition_point(|b| *b <= s)],
            WeightKind::Tabulated { nodes, values } => {
                let i = nodes.partition_point(|n| *n <= s);
                if i == 0 {
                    values[0]
                } else if i == nodes.len() {
                    values[i - 1]
                } else {
                    let th = (s - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
                    values[i - 1] + th * (values[i] - values[i - 1])
                }
            }
        }
    }

    /// Points where the weight may vanish or blow up.
    pub fn singular_points(&self) -> Vec<f64> {
        match self.kind {
            WeightKind::Power { alpha, center } if alpha != 0.0 => vec![center],
            _ => vec![],
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match &self.kind {
            WeightKind::Step { breaks, .. } => breaks.clone(),
            WeightKind::Tabulated { nodes, .. } => nodes.clone(),
            _ => vec![],
        }
    }

    /// Average over `[a, b]`; closed form for power weights, otherwise the
    /// value at the midpoint for degenerate cells.
    pub fn cell_average(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            WeightKind::Power { alpha, center } if alpha != 0.0 && b > a => {
                let prim = |y: f64| y.signum() * y.abs().powf(alpha + 1.0) / (alpha + 1.0);
                (prim(b - center) - prim(a - center)) / (b - a)
            }
            _ => self.eval(0.5 * (a + b)),
        }
    }

    /// Value used at a grid node with cell `[a, b]`: the nodal value, or the
    /// cell average when the node sits on a singular point.
    pub fn node_value(&self, s: f64, a: f64, b: f64) -> f64 {
        if self.singular_points().contains(&s) {
            self.cell_average(a, b)
        } else {
            self.eval(s)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductWeight {
    /// Time weight, class `q`.
    pub w0: Weight1D,
    /// Velocity weights, classes `r_1..r_d`.
    pub wi: Vec<Weight1D>,
    /// Declared bound on the `A_p` constants.
    pub k: f64,
}

impl ProductWeight {
    pub fn unit(d: usize) -> Self {
        Self {
            w0: Weight1D::constant(),
            wi: vec![Weight1D::constant(); d],
            k: 1.0,
        }
    }

    pub fn is_unit(&self) -> bool {
        self.w0.kind == WeightKind::Constant && self.wi.iter().all(|w| w.kind == WeightKind::Constant)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 1.0) {
            return Err(invalid("k", "declared bound must be >= 1"));
        }
        self.w0.validate()?;
        self.wi.iter().try_for_each(|w| w.validate())
    }

    /// Measured `A_p` constants of all factors, each checked against `k`.
    pub fn check_constants(&self, family: &IntervalFamily) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(1 + self.wi.len());
        for w in std::iter::once(&self.w0).chain(&self.wi) {
            let c = ap_constant_1d(w, w.class, family)?.value;
            if !(c <= self.k) {
                return Err(KfpError::Invariant {
                    id: "weight_constant_bound",
                    detail: format!("[w]_A{} = {c} exceeds K = {}", w.class, self.k),
                });
            }
            out.push(c);
        }
        Ok(out)
    }
}

/// `w_0(t) ∏ w_i(v_i)`.
pub fn product_weight_eval(w: &ProductWeight, t: f64, v: &[f64]) -> Result<f64> {
    if v.len() != w.wi.len() {
        return Err(KfpError::DimensionMismatch {
            expected: w.wi.len(),
            found: v.len(),
        });
    }
    Ok(w.w0.eval(t) * w.wi.iter().zip(v).map(|(wi, &vi)| wi.eval(vi)).product::<f64>())
}

/// Intervals `[c - ρ, c + ρ]` with `c ∈ {0, ±2^j h}` and `ρ = 2^j h`,
/// `j_min ≤ j ≤ j_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntervalFamily {
    pub h: f64,
    pub j_min: i32,
    pub j_max: i32,
}

impl Default for IntervalFamily {
    fn default() -> Self {
        Self { h: 1.0, j_min: -10, j_max: 10 }
    }
}

impl IntervalFamily {
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let scales: Vec<f64> = (self.j_min..=self.j_max).map(|j| self.h * 2f64.powi(j)).collect();
        let mut centers = vec![0.0];
        for &s in &scales {
            centers.push(s);
            centers.push(-s);
        }
        centers.iter().flat_map(|&c| scales.iter().map(move |&r| (c, r))).collect()
    }

    /// The family refined once: half the base step, one more scale at each end.
    pub fn refined(&self) -> Self {
        Self {
            h: self.h,
            j_min: self.j_min - 1,
            j_max: self.j_max + 1,
        }
    }
}

const SHELL_ORDER: usize = 16;
const MAX_SHELLS: usize = 600;

/// `∫ g` between a singular point `s` and `far` over dyadic shells shrinking
/// toward `s`; `None` when successive shells stop decreasing.
fn shell_integral(rule: &GaussLegendre, s: f64, far: f64, g: &mut dyn FnMut(f64) -> Result<f64>) -> Result<Option<f64>> {
    let len = far - s;
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut ratio = 0.0;
    let mut flat = 0;
    let mut hi = 1.0;
    for j in 0..MAX_SHELLS {
        let lo = 0.5 * hi;
        let (a, b) = (s + lo * len, s + hi * len);
        // shells below the resolution of s: close with the geometric tail
        if a == s || b == a {
            break;
        }
        let mut c = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            c += w * g(0.5 * (a + b) + 0.5 * (b - a) * x)?;
        }
        c *= 0.5 * (b - a).abs();
        total += c;
        if j > 0 {
            ratio = c / prev;
            if ratio >= 1.0 - 1e-9 {
                flat += 1;
                if flat >= 3 {
                    return Ok(None);
                }
            } else {
                flat = 0;
                let tail = c * ratio / (1.0 - ratio);
                if tail <= 1e-14 * total {
                    return Ok(Some(total + tail));
                }
            }
        }
        prev = c;
        hi = lo;
    }
    if flat > 0 || !(ratio < 1.0) {
        return Ok(None);
    }
    Ok(Some(total + prev * ratio / (1.0 - ratio)))
}

/// `∫_a^b g` split at `cuts`; pieces touching a point of `singular` use
/// dyadic shells, the rest a composite Gauss rule.
fn integrate_split(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    singular: &[f64],
    kinks: &[f64],
    g: &mut dyn FnMut(f64) -> Result<f64>,
) -> Result<Option<f64>> {
    let mut cuts = vec![a, b];
    cuts.extend(singular.iter().chain(kinks).copied().filter(|&c| c > a && c < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let sl = singular.contains(&lo);
        let sh = singular.contains(&hi);
        let piece = if sl && sh {
            let m = 0.5 * (lo + hi);
            match (shell_integral(rule, lo, m, g)?, shell_integral(rule, hi, m, g)?) {
                (Some(x), Some(y)) => x + y,
                _ => return Ok(None),
            }
        } else if sl {
            match shell_integral(rule, lo, hi, g)? {
                Some(x) => x,
                None => return Ok(None),
            }
        } else if sh {
            match shell_integral(rule, hi, lo, g)? {
                Some(x) => x,
                None => return Ok(None),
            }
        } else {
            let panels = 4;
            let ph = (hi - lo) / panels as f64;
            let mut acc = 0.0;
            for p in 0..panels {
                let c = lo + (p as f64 + 0.5) * ph;
                for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                    acc += wt * g(c + 0.5 * ph * x)?;
                }
            }
            acc * 0.5 * ph
        };
        total += piece;
    }
    Ok(Some(total))
}

/// Average of `w^e` over `[a, b]`, `None` if the integral diverges.
pub fn weight_power_average(w: &Weight1D, e: f64, a: f64, b: f64) -> Result<Option<f64>> {
    let rule = GaussLegendre::new(SHELL_ORDER);
    let mut g = |s: f64| {
        let val = w.eval(s);
        if !(val > 0.0) || !val.is_finite() {
            return Err(KfpError::NonPositiveWeight { at: s });
        }
        Ok(val.powf(e))
    };
    Ok(integrate_split(&rule, a, b, &w.singular_points(), &w.kinks(), &mut g)?.map(|v| v / (b - a)))
}

/// `(⨍_I w)(⨍_I w^{-1/(p-1)})^{p-1}`, `+∞` when either average diverges.
pub fn ap_product(w: &Weight1D, p: f64, a: f64, b: f64) -> Result<f64> {
    let m1 = weight_power_average(w, 1.0, a, b)?;
    let m2 = weight_power_average(w, -1.0 / (p - 1.0), a, b)?;
    Ok(match (m1, m2) {
        (Some(x), Some(y)) => x * y.powf(p - 1.0),
        _ => f64::INFINITY,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApReport {
    /// Largest product over the family; `+∞` flags divergence.
    pub value: f64,
    /// `(center, radius)` of the maximizing interval.
    pub center: f64,
    pub radius: f64,
}

impl ApReport {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Lower bound for `[w]_{A_p}` from the interval family.
pub fn ap_constant_1d(w: &Weight1D, p: f64, family: &IntervalFamily) -> Result<ApReport> {
    if !(p > 1.0) {
        return Err(invalid("p", "must be > 1"));
    }
    w.validate()?;
    let ivs = family.intervals();
    let vals: Vec<f64> = ivs
        .par_iter()
        .map(|&(c, r)| ap_product(w, p, c - r, c + r))
        .collect::<Result<_>>()?;
    let (i, &value) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| invalid("family", "empty interval family"))?;
    if value < 1.0 - 1e-9 {
        return Err(KfpError::Invariant {
            id: "ap_at_least_one",
            detail: format!("A_p product {value} < 1 on [{}, {}]", ivs[i].0 - ivs[i].1, ivs[i].0 + ivs[i].1),
        });
    }
    Ok(ApReport {
        value,
        center: ivs[i].0,
        radius: ivs[i].1,
    })
}

/// Inputs of the kinetic `A_p` functional of `|x|^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticApParams {
    pub alpha: f64,
    pub p: f64,
    pub r: f64,
    pub z0: PhasePoint,
    pub c: f64,
    /// Time cut; `f64::INFINITY` for none.
    pub t_cut: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 4096;

/// Monte Carlo estimate of `(⨍ |x|^α)(⨍ |x|^{-α/(p-1)})^{p-1}` over the
/// symmetrized ball `{ρ̂_c(·, z_0) < r} ∩ {t ≤ T}`, with a delta-method
/// standard error.
pub fn kinetic_ap_functional(params: &KineticApParams, seed: u64) -> Result<Estimate> {
    let KineticApParams {
        alpha,
        p,
        r,
        ref z0,
        c,
        t_cut,
        samples,
    } = *params;
    let d = z0.dim() as f64;
    if !(p > 1.0) {
        return Err(invalid("p", "must be > 1"));
    }
    if !(alpha > -d && alpha < d * (p - 1.0)) {
        return Err(invalid("alpha", format!("must lie in ({}, {})", -d, d * (p - 1.0))));
    }
    if !(r > 0.0) || samples == 0 {
        return Err(invalid("r", "need r > 0 and at least one sample"));
    }
    let qp = QuasiMetricParams::new(c)?;
    if c < 1.0 {
        return Err(invalid("c", "must be >= 1"));
    }
    if z0.t - r * r >= t_cut {
        return Err(invalid("t_cut", "the ball does not meet {t <= T}"));
    }
    if alpha == 0.0 {
        return Ok(Estimate { mean: 1.0, se: 0.0 });
    }
    let beta = -alpha / (p - 1.0);
    let chunks = samples.div_ceil(MC_CHUNK);
    // Sums of (a, b, a², b², ab) over accepted points and the hit count.
    let parts: Vec<[f64; 6]> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = stream(seed, ci as u64);
            let n = MC_CHUNK.min(samples - ci * MC_CHUNK);
            let mut z = z0.clone();
            let mut acc = [0.0; 6];
            for _ in 0..n {
                sample_two_sided_box(&mut rng, z0, r, c * r, &mut z);
                if z.t > t_cut || symmetrized_distance_raw(z.t, &z.x, &z.v, z0.t, &z0.x, &z0.v, qp) >= r {
                    continue;
                }
                let nx = z.x.iter().map(|a| a * a).sum::<f64>().sqrt();
                let (a, b) = (nx.powf(alpha), nx.powf(beta));
                acc[0] += a;
                acc[1] += b;
                acc[2] += a * a;
                acc[3] += b * b;
                acc[4] += a * b;
                acc[5] += 1.0;
            }
            acc
        })
        .collect();
    let mut s = [0.0; 6];
    for part in &parts {
        for (a, b) in s.iter_mut().zip(part) {
            *a += b;
        }
    }
    let n = s[5];
    if n < 2.0 {
        return Err(KfpError::Unsupported("too few accepted samples in the ball".into()));
    }
    let (ma, mb) = (s[0] / n, s[1] / n);
    let va = (s[2] / n - ma * ma).max(0.0);
    let vb = (s[3] / n - mb * mb).max(0.0);
    let cab = s[4] / n - ma * mb;
    let mean = ma * mb.powf(p - 1.0);
    let ga = mb.powf(p - 1.0);
    let gb = (p - 1.0) * ma * mb.powf(p - 2.0);
    let var = (ga * ga * va + gb * gb * vb + 2.0 * ga * gb * cab).max(0.0) / n;
    Ok(Estimate { mean, se: var.sqrt() })
}
