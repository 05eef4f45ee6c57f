//! Fractional Laplacians in `x`, the mixed operator `D_v (-Δ_x)^{1/6}`,
//! kinetic mollification and the dyadic tail integral.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{invalid, KfpError, Result};
use crate::grid::GridField;
use crate::quadrature::{graded_toward_left, GaussLegendre};
use crate::spectral::apply_multiplier;

/// `(-Δ_x)^s u` through the multiplier `|k|^{2s}`.
pub fn frac_laplacian_x(u: &GridField, s: f64) -> Result<GridField> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("s", "must lie in (0, 1)"));
    }
    Ok(apply_multiplier(u, |m| {
        let k = m.k_norm();
        Complex64::new(if k == 0.0 { 0.0 } else { k.powf(2.0 * s) }, 0.0)
    }))
}

/// Components of `D_v (-Δ_x)^{1/6} u`, one field per velocity axis.
pub fn dv_frac_sixth(u: &GridField) -> Vec<GridField> {
    (0..u.spec.d)
        .map(|a| {
            apply_multiplier(u, |m| {
                if m.xi_nyquist[a] {
                    return Complex64::default();
                }
                let k = m.k_norm();
                let kk = if k == 0.0 { 0.0 } else { k.powf(1.0 / 3.0) };
                Complex64::new(0.0, m.xi[a] * kk)
            })
        })
        .collect()
}

/// Normalization making the singular integral equal to the `|k|^{2s}`
/// multiplier on `R^d`: `4^s Γ(d/2 + s) / (π^{d/2} |Γ(-s)|)`.
pub fn frac_constant(d: usize, s: f64) -> f64 {
    let h = d as f64 / 2.0;
    4f64.powf(s) * gamma(h + s) / (PI.powf(h) * gamma(-s).abs())
}

/// `(-Δ)^s u(x)` from `c_{d,s} ∫ (u(x) - u(x+y)) |y|^{-d-2s} dy` for
/// `d ∈ {1, 2}` and `s ∈ (0, 1/2)`.
///
/// Radial form: the integrand is averaged over a symmetric set of
/// directions, which symmetrizes the difference near `y = 0`. The radial
/// integral uses dyadic shells toward 0 on `[0, 1]` and dyadic shells
/// outward on `[1, ∞)` until they stop contributing.
pub fn frac_laplacian_singular<F: Fn(&[f64]) -> f64>(u: F, x: &[f64], s: f64) -> Result<f64> {
    let d = x.len();
    if !(s > 0.0 && s < 0.5) {
        return Err(KfpError::Unsupported("the pointwise formula needs s in (0, 1/2)".into()));
    }
    let dirs: Vec<Vec<f64>> = match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..128)
            .map(|m| {
                let th = 2.0 * PI * m as f64 / 128.0;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => return Err(KfpError::Unsupported("the pointwise oracle supports d <= 2".into())),
    };
    let sphere = match d {
        1 => 2.0,
        _ => 2.0 * PI,
    };
    let u0 = u(x);
    let dir_avg = |rho: f64| {
        let mut y = vec![0.0; d];
        let mut avg = 0.0;
        for dir in &dirs {
            for i in 0..d {
                y[i] = x[i] + rho * dir[i];
            }
            avg += u(&y);
        }
        avg / dirs.len() as f64
    };
    let radial = |rho: f64| (u0 - dir_avg(rho)) * rho.powf(-1.0 - 2.0 * s);
    let rule = GaussLegendre::new(20);
    let mut total = graded_toward_left(&rule, 0.0, 1.0, 80, radial);
    let mut lo = 1.0;
    for _ in 0..200 {
        let hi = 2.0 * lo;
        total += rule.composite(lo, hi, 16, radial);
        lo = hi;
        if lo < 8.0 {
            continue;
        }
        // once the directional average has settled to a constant C the
        // remaining tail is (u(x) - C) ∫_lo^∞ ρ^{-1-2s} dρ
        let far: Vec<f64> = [1.0, 1.5, 2.0, 3.0, 4.0].iter().map(|m| dir_avg(m * lo)).collect();
        let mn = far.iter().copied().fold(f64::INFINITY, f64::min);
        let mx = far.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if mx - mn <= 1e-15 * u0.abs().max(mx.abs()).max(1e-300) {
            let c = 0.5 * (mn + mx);
            total += (u0 - c) * lo.powf(-2.0 * s) / (2.0 * s);
            return Ok(frac_constant(d, s) * sphere * total);
        }
    }
    Err(KfpError::Unsupported("singular integral did not converge; u must settle at infinity".into()))
}

/// Smooth bump `exp(-1/(1-s²))` on `(-1, 1)`, not normalized.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Even bump on `(-1, 1)` with unit mass and its cosine transform.
struct Bump {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Bump {
    fn new() -> Self {
        let gl = GaussLegendre::new(64);
        let raw: Vec<f64> = gl.nodes.iter().zip(&gl.weights).map(|(&s, &w)| w * bump(s)).collect();
        let mass: f64 = raw.iter().sum();
        Self {
            nodes: gl.nodes,
            weights: raw.into_iter().map(|w| w / mass).collect(),
        }
    }

    /// `∫ φ(s) e^{-iκs} ds`, real by symmetry; exactly 1 at `κ = 0`.
    fn transform(&self, kappa: f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * (kappa * s).cos()).sum()
    }
}

/// `h_(ε)(t,x,v) = ∫ h(t - ε² t', x - ε^{1/2} x', v - ε v') η(t',x',v')` with
/// `η = φ_1(t') ∏ φ(x'_i) ∏ φ(v'_i)`: `φ_1` a unit-mass bump on `(0, 1)`
/// and `φ` a unit-mass bump on `(-1, 1)`.
///
/// The `(x, v)` convolution is a Fourier multiplier; the time convolution
/// uses cubic interpolation between slabs and extends `h` backwards by its
/// first slab.
pub fn mollify(h: &GridField, eps: f64) -> Result<GridField> {
    let spec = &h.spec;
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if eps.sqrt() >= spec.lx || eps >= spec.lv {
        return Err(invalid("eps", "kernel support does not fit the periodic box"));
    }
    let window = spec.t_hi - spec.t_lo;
    if spec.nt > 1 && eps * eps >= window {
        return Err(invalid("eps", "time support of the kernel exceeds the window"));
    }
    let b = Bump::new();
    let d = spec.d;
    let sx = eps.sqrt();
    let smoothed = apply_multiplier(h, |m| {
        let mut f = 1.0;
        for a in 0..d {
            f *= b.transform(sx * m.k[a]) * b.transform(eps * m.xi[a]);
        }
        Complex64::new(f, 0.0)
    });
    if spec.nt == 1 {
        return Ok(smoothed);
    }

    // time kernel on (0, 1)
    let gl = GaussLegendre::new(32);
    let tn: Vec<f64> = gl.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
    let mut tw: Vec<f64> = gl.nodes.iter().zip(&gl.weights).map(|(&x, &w)| w * bump(x)).collect();
    let mass: f64 = tw.iter().sum();
    tw.iter_mut().for_each(|w| *w /= mass);

    let slab = spec.slab_len();
    let nt = spec.nt;
    let dt = spec.dt();
    let mut out = GridField::zeros(spec.clone());
    for it in 0..nt {
        let t = spec.time(it);
        let dst = &mut out.values[it * slab..(it + 1) * slab];
        for (&s, &w) in tn.iter().zip(&tw) {
            let tau = (t - eps * eps * s).max(spec.t_lo);
            // cubic Lagrange on the four nearest nodes
            let pos = (tau - spec.t_lo) / dt;
            let i = (pos.floor() as usize).min(nt - 1);
            let width = 4.min(nt);
            let start = (i + 1).saturating_sub(width / 2).min(nt - width);
            for j in 0..width {
                let mut l = 1.0;
                for m in 0..width {
                    if m != j {
                        l *= (pos - (start + m) as f64) / (j as f64 - m as f64);
                    }
                }
                if l == 0.0 {
                    continue;
                }
                let src = &smoothed.values[(start + j) * slab..(start + j + 1) * slab];
                let c = w * l;
                for (o, v) in dst.iter_mut().zip(src) {
                    *o += c * v;
                }
            }
        }
    }
    Ok(out)
}

/// A field on the line: constant, power growth and Gaussian bumps,
/// `offset + growth·|y|^γ + Σ a_j exp(-(y - c_j)²/(2 w_j²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailField {
    pub offset: f64,
    pub growth: f64,
    pub gamma: f64,
    /// `(amplitude, center, width)`.
    pub bumps: Vec<(f64, f64, f64)>,
}

impl TailField {
    pub fn constant(c: f64) -> Self {
        Self {
            offset: c,
            growth: 0.0,
            gamma: 0.0,
            bumps: vec![],
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let mut v = self.offset;
        if self.growth != 0.0 {
            v += self.growth * y.abs().powf(self.gamma);
        }
        for &(a, c, w) in &self.bumps {
            v += a * (-0.5 * ((y - c) / w).powi(2)).exp();
        }
        v
    }

    /// Intervals outside of which all bumps are below `e^{-72}` of their size.
    fn windows(&self) -> Vec<(f64, f64)> {
        let mut w: Vec<(f64, f64)> = self.bumps.iter().map(|&(_, c, s)| (c - 12.0 * s, c + 12.0 * s)).collect();
        w.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, b) in w {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }

    fn min_width(&self) -> f64 {
        self.bumps.iter().map(|b| b.2).fold(f64::INFINITY, f64::min)
    }

    /// `∫_lo^hi F(y) dy` where `F` is smooth on `[lo, hi]` away from the
    /// bump windows; fine panels inside the windows, Gauss rule outside.
    fn integrate(&self, lo: f64, hi: f64, f: &dyn Fn(f64) -> f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let rule = GaussLegendre::new(12);
        let mut cuts = vec![lo, hi];
        for (a, b) in self.windows() {
            cuts.extend([a, b].into_iter().filter(|&c| c > lo && c < hi));
        }
        cuts.sort_by(f64::total_cmp);
        let h = 0.25 * self.min_width();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let inside = self.windows().iter().any(|&(p, q)| mid > p && mid < q);
            let panels = if inside { ((b - a) / h).ceil().max(1.0) as usize } else { 8 };
            // outside the windows the integrand is a smooth power law; grade
            // geometrically when the piece spans many decades
            total += if !inside && a > 0.0 && b / a > 4.0 {
                graded(a, b, f)
            } else if !inside && b < 0.0 && a / b > 4.0 {
                graded(-b, -a, &|y| f(-y))
            } else {
                rule.composite(a, b, panels, f)
            };
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    /// `(⨍_{B_{R³}} |g|^p)^{1/p}`.
    pub lhs: f64,
    /// `R^{-3σ} Σ_k 2^{-3kσ} (⨍_{B_{(2^k R)³}} |f|^p)^{1/p}`.
    pub shell_sum: f64,
    /// `lhs / shell_sum`.
    pub ratio: f64,
    /// Explicit constant `2^{7+6σ}` for `d = 1`.
    pub explicit_n: f64,
    pub holds: bool,
}

const MAX_TAIL_SHELLS: usize = 120;

fn check_tail_args(sigma: f64, r: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    if !(r > 0.0) {
        return Err(invalid("R", "must be positive"));
    }
    Ok(())
}

/// `g(x) = ∫_{|y| > R³} f(x + y) |y|^{-(1+σ)} dy` on the line, summed over
/// the shells `(2^k R)³ < |y| < (2^{k+1} R)³`.
pub fn dyadic_tail(f: &TailField, sigma: f64, r: f64, x: f64) -> Result<f64> {
    check_tail_args(sigma, r)?;
    let e = -(1.0 + sigma);
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut flat = 0;
    for k in 0..MAX_TAIL_SHELLS {
        let a = (2f64.powi(k as i32) * r).powi(3);
        let b = 8.0 * a;
        // shell contribution on both sides; the constant and power parts in
        // closed form, the bumps by quadrature over their windows
        let mut c = f.offset * 2.0 * (a.powf(-sigma) - b.powf(-sigma)) / sigma;
        if f.growth != 0.0 {
            let gp = |y: f64| (x + y).abs().powf(f.gamma) * y.powf(e);
            let gm = |y: f64| (x - y).abs().powf(f.gamma) * y.powf(e);
            c += f.growth * (graded(a, b, &gp) + graded(a, b, &gm));
        }
        if !f.bumps.is_empty() {
            let bump_only = |y: f64| f.eval(y) - f.offset - if f.growth != 0.0 { f.growth * y.abs().powf(f.gamma) } else { 0.0 };
            let gpos = |y: f64| bump_only(x + y) * y.powf(e);
            let gneg = |y: f64| bump_only(x - y) * y.powf(e);
            let shifted = TailField {
                offset: 0.0,
                growth: 0.0,
                gamma: 0.0,
                bumps: f.bumps.iter().map(|&(am, cc, w)| (am, cc - x, w)).collect(),
            };
            let mirrored = TailField {
                bumps: f.bumps.iter().map(|&(am, cc, w)| (am, x - cc, w)).collect(),
                ..shifted.clone()
            };
            c += shifted.integrate(a, b, &gpos) + mirrored.integrate(a, b, &gneg);
        }
        total += c;
        if k > 0 && prev != 0.0 {
            let ratio = (c / prev).abs();
            if ratio >= 1.0 - 1e-9 {
                flat += 1;
                if flat >= 3 {
                    return Err(KfpError::Invariant {
                        id: "tail_converges",
                        detail: "shell contributions do not decay; f grows too fast".into(),
                    });
                }
            } else {
                flat = 0;
            }
        }
        if c.abs() <= 1e-15 * total.abs() && k > 2 {
            return Ok(total);
        }
        if c == 0.0 && total == 0.0 && k > 2 {
            return Ok(0.0);
        }
        prev = c;
    }
    Err(KfpError::Invariant {
        id: "tail_converges",
        detail: "shell sum did not converge".into(),
    })
}

/// `∫_a^b g` for `0 < a < b` over doubling segments.
fn graded(a: f64, b: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(12);
    let mut acc = 0.0;
    let mut x0 = a;
    while x0 < b {
        let x1 = (2.0 * x0).min(b);
        acc += rule.composite(x0, x1, 2, g);
        x0 = x1;
    }
    acc
}

/// `(⨍_{B_ρ(0)} |f|^p)^{1/p}` on the line.
fn ball_mean(f: &TailField, rho: f64, p: f64) -> f64 {
    let g = |y: f64| f.eval(y).abs().powf(p);
    let mut i = f.integrate(0.0, rho, &g) + f.integrate(-rho, 0.0, &g);
    if f.growth == 0.0 && f.bumps.is_empty() {
        i = 2.0 * rho * f.offset.abs().powf(p);
    }
    (i / (2.0 * rho)).powf(1.0 / p)
}

/// Both sides of the shell estimate for `g` on `B_{R³}` in `L_p`.
pub fn tail_bound_check(f: &TailField, sigma: f64, r: f64, p: f64) -> Result<TailBound> {
    check_tail_args(sigma, r)?;
    if !(p >= 1.0) {
        return Err(invalid("p", "must be >= 1"));
    }
    let r3 = r.powi(3);
    let gl = GaussLegendre::new(16);
    let panels = 8;
    let ph = 2.0 * r3 / panels as f64;
    let mut acc = 0.0;
    for j in 0..panels {
        let c = -r3 + (j as f64 + 0.5) * ph;
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            acc += w * 0.5 * ph * dyadic_tail(f, sigma, r, c + 0.5 * ph * x)?.abs().powf(p);
        }
    }
    let lhs = (acc / (2.0 * r3)).powf(1.0 / p);
    let mut sum = 0.0;
    for k in 0..MAX_TAIL_SHELLS {
        let term = 2f64.powf(-3.0 * k as f64 * sigma) * ball_mean(f, (2f64.powi(k as i32) * r).powi(3), p);
        sum += term;
        if term <= 1e-15 * sum && k > 2 {
            break;
        }
    }
    let shell_sum = r.powf(-3.0 * sigma) * sum;
    let ratio = if shell_sum > 0.0 { lhs / shell_sum } else { 0.0 };
    let explicit_n = 2f64.powf(7.0 + 6.0 * sigma);
    Ok(TailBound {
        lhs,
        shell_sum,
        ratio,
        explicit_n,
        holds: lhs <= explicit_n * shell_sum,
    })
}
