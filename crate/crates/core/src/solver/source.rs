//! Sources with closed-form Fourier transforms in `(x, v)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KfpError, Result};
use crate::grid::{GridField, GridSpec};

/// Frequencies closer than this to zero count as the zero mode for
/// [`Envelope::Plane`] axes.
const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    /// `exp(-(t - center)² / (2 width²))`.
    Gaussian { center: f64, width: f64 },
    /// `(t - start)^degree exp(-rate (t - start))` for `t > start`.
    PolyExp { start: f64, degree: u32, rate: f64 },
    Constant,
    /// Indicator of `[start, end]`.
    Indicator { start: f64, end: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Gaussian { center, width } => (-0.5 * ((t - center) / width).powi(2)).exp(),
            Self::PolyExp { start, degree, rate } => {
                if t > start {
                    let s = t - start;
                    s.powi(degree as i32) * (-rate * s).exp()
                } else {
                    0.0
                }
            }
            Self::Constant => 1.0,
            Self::Indicator { start, end } => {
                if (start..=end).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Interval outside which the profile is below `e^{-e_max}` relative to its peak.
    pub fn support(&self, e_max: f64) -> (f64, f64) {
        match *self {
            Self::Gaussian { center, width } => {
                let h = width * (2.0 * e_max).sqrt();
                (center - h, center + h)
            }
            Self::PolyExp { start, degree, rate } => {
                // s^n e^{-μ s} peaks at n/μ; past the peak it decays at least like e^{-μ s/2}
                // once s ≥ 2n/μ · ln-ish margin, so a generous bound suffices.
                let peak = degree as f64 / rate;
                (start, start + 4.0 * peak + 2.0 * (e_max + 5.0) / rate)
            }
            Self::Constant => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Indicator { start, end } => (start, end),
        }
    }

    /// Points where the profile is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::PolyExp { start, .. } => vec![start],
            Self::Indicator { start, end } => vec![start, end],
            _ => vec![],
        }
    }

    /// Length scale of variation in `t`.
    pub fn scale(&self) -> f64 {
        match *self {
            Self::Gaussian { width, .. } => width,
            Self::PolyExp { degree, rate, .. } => 1.0 / (rate + degree as f64).max(1e-300),
            Self::Constant | Self::Indicator { .. } => f64::INFINITY,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { width, .. } if !(width > 0.0) => Err(invalid("width", "must be positive")),
            Self::PolyExp { rate, .. } if !(rate > 0.0) => Err(invalid("rate", "must be positive")),
            Self::Indicator { start, end } if !(end > start) => Err(invalid("indicator", "need start < end")),
            _ => Ok(()),
        }
    }
}

/// Spatial factor of a term along the `x` block or the `v` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    /// `exp(-|y - center|² / (2 width²))`.
    Gaussian { center: Vec<f64>, width: f64 },
    /// Constant 1; only exact lattice frequencies carry mass.
    Plane,
    /// Dirac mass at `center`; transform only, cannot be sampled.
    Point { center: Vec<f64> },
}

impl Envelope {
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        match self {
            Self::Gaussian { center, width } => {
                let r2: f64 = y.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                Ok((-0.5 * r2 / (width * width)).exp())
            }
            Self::Plane => Ok(1.0),
            Self::Point { .. } => Err(KfpError::Unsupported("a point mass cannot be sampled on a grid".into())),
        }
    }

    /// `∫ g(y) e^{-i κ·y} dy`; a [`Envelope::Plane`] factor contributes the
    /// Kronecker delta of the lattice instead.
    pub fn transform(&self, kappa: &[f64]) -> Complex64 {
        match self {
            Self::Gaussian { center, width } => {
                let mut acc = Complex64::new(1.0, 0.0);
                for (k, c) in kappa.iter().zip(center) {
                    acc *= Complex64::from_polar(width * (2.0 * PI).sqrt() * (-0.5 * (k * width).powi(2)).exp(), -k * c);
                }
                acc
            }
            Self::Plane => {
                if kappa.iter().all(|k| k.abs() <= LATTICE_TOL) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                }
            }
            Self::Point { center } => {
                let ph: f64 = kappa.iter().zip(center).map(|(k, c)| k * c).sum();
                Complex64::from_polar(1.0, -ph)
            }
        }
    }

    /// Transform divided by the period volume `(2 half)^d`: the Fourier
    /// coefficient of the periodized factor.
    pub fn coefficient(&self, kappa: &[f64], half: f64) -> Complex64 {
        match self {
            Self::Plane => self.transform(kappa),
            _ => self.transform(kappa) / (2.0 * half).powi(kappa.len() as i32),
        }
    }

    /// Scale on which the transform varies, used to size quadrature panels
    /// when the frequency slides along a characteristic.
    pub fn frequency_scale(&self) -> f64 {
        match self {
            Self::Gaussian { center, width } => {
                let c = center.iter().map(|a| a * a).sum::<f64>().sqrt();
                1.0 / (width + c).max(1e-300)
            }
            Self::Plane => f64::INFINITY,
            Self::Point { center } => {
                let c = center.iter().map(|a| a * a).sum::<f64>().sqrt();
                if c == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / c
                }
            }
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Self::Gaussian { center, width } => {
                if center.len() != d {
                    return Err(KfpError::DimensionMismatch {
                        expected: d,
                        found: center.len(),
                    });
                }
                if !(*width > 0.0) {
                    return Err(invalid("width", "must be positive"));
                }
            }
            Self::Point { center } if center.len() != d => {
                return Err(KfpError::DimensionMismatch {
                    expected: d,
                    found: center.len(),
                })
            }
            _ => {}
        }
        Ok(())
    }
}

/// `amplitude · time(t) · x_env(x) · v_env(v) · cos(k*·x + ξ*·v + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTerm {
    pub amplitude: f64,
    pub time: TimeProfile,
    pub x_env: Envelope,
    pub v_env: Envelope,
    pub k_mod: Vec<f64>,
    pub xi_mod: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

impl SourceTerm {
    pub fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
        let arg: f64 = self.k_mod.iter().zip(x).map(|(k, y)| k * y).sum::<f64>()
            + self.xi_mod.iter().zip(v).map(|(k, y)| k * y).sum::<f64>()
            + self.phase;
        Ok(self.amplitude * self.time.eval(t) * self.x_env.eval(x)? * self.v_env.eval(v)? * arg.cos())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSource {
    pub d: usize,
    pub terms: Vec<SourceTerm>,
}

/// How spatial transforms are normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Fourier coefficients on the periodic box `[-lx, lx)^d × [-lv, lv)^d`.
    Box { lx: f64, lv: f64 },
    /// Plain transforms on `ℝ^{2d}`.
    Continuous,
}

/// One half of a cosine term at a fixed `k`: `weight · T(t) · V(η - shift)`.
#[derive(Debug, Clone)]
struct ModeHalf {
    weight: Complex64,
    time: TimeProfile,
    v_env: Envelope,
    shift: Vec<f64>,
    norm_v: Option<f64>,
}

/// The source restricted to one `x`-frequency, as a function of `(t, η)`.
#[derive(Debug, Clone)]
pub struct AnalyticMode {
    halves: Vec<ModeHalf>,
    time_scale: f64,
    freq_scale: f64,
}

impl AnalyticSource {
    pub fn new(d: usize, terms: Vec<SourceTerm>) -> Result<Self> {
        let s = Self { d, terms };
        s.validate()?;
        Ok(s)
    }

    pub fn zero(d: usize) -> Self {
        Self { d, terms: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("d", "must be >= 1"));
        }
        for t in &self.terms {
            if t.k_mod.len() != self.d || t.xi_mod.len() != self.d {
                return Err(KfpError::DimensionMismatch {
                    expected: self.d,
                    found: t.k_mod.len().min(t.xi_mod.len()),
                });
            }
            t.time.validate()?;
            t.x_env.validate(self.d)?;
            t.v_env.validate(self.d)?;
            if matches!(t.v_env, Envelope::Plane)
                && !(matches!(t.x_env, Envelope::Plane) && t.k_mod.iter().all(|&k| k == 0.0))
            {
                return Err(KfpError::Unsupported(
                    "a source constant in v must also be constant in x: nonzero x-frequencies shift v-frequencies off the lattice".into(),
                ));
            }
        }
        Ok(())
    }

    /// Scalar multiple of the source.
    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        for t in &mut s.terms {
            t.amplitude *= c;
        }
        s
    }

    /// Union of the terms of two sources.
    pub fn plus(&self, other: &Self) -> Self {
        let mut s = self.clone();
        s.terms.extend(other.terms.iter().cloned());
        s
    }

    pub fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
        self.terms.iter().map(|term| term.eval(t, x, v)).sum()
    }

    pub fn sample(&self, spec: &GridSpec) -> Result<GridField> {
        if spec.d != self.d {
            return Err(KfpError::DimensionMismatch {
                expected: self.d,
                found: spec.d,
            });
        }
        if self.terms.iter().any(|t| matches!(t.x_env, Envelope::Point { .. }) || matches!(t.v_env, Envelope::Point { .. })) {
            return Err(KfpError::Unsupported("a point mass cannot be sampled on a grid".into()));
        }
        Ok(GridField::from_fn(spec.clone(), |t, x, v| self.eval(t, x, v).unwrap_or(f64::NAN)))
    }

    /// Effective time support (union over terms).
    pub fn support(&self, e_max: f64) -> (f64, f64) {
        self.terms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            let (a, b) = t.time.support(e_max);
            (lo.min(a), hi.max(b))
        })
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.terms.iter().flat_map(|t| t.time.breakpoints()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Modulations on `Plane` axes must sit on the lattice of `spec`.
    pub fn check_lattice(&self, spec: &GridSpec) -> Result<()> {
        let on = |w: f64, half: f64| {
            let n = w * half / PI;
            (n - n.round()).abs() < 1e-9
        };
        for t in &self.terms {
            if matches!(t.x_env, Envelope::Plane) && !t.k_mod.iter().all(|&k| on(k, spec.lx)) {
                return Err(invalid("k_mod", "plane factor in x needs a lattice frequency"));
            }
            if matches!(t.v_env, Envelope::Plane) && !t.xi_mod.iter().all(|&k| on(k, spec.lv)) {
                return Err(invalid("xi_mod", "plane factor in v needs a lattice frequency"));
            }
        }
        Ok(())
    }

    /// Restrict to one `x`-frequency `k`.
    pub fn at_k(&self, k: &[f64], norm: Normalization) -> AnalyticMode {
        let mut halves = Vec::new();
        let mut time_scale = f64::INFINITY;
        let mut freq_scale = f64::INFINITY;
        for term in &self.terms {
            for sign in [1.0, -1.0] {
                let kappa: Vec<f64> = k.iter().zip(&term.k_mod).map(|(a, b)| a - sign * b).collect();
                let xc = match norm {
                    Normalization::Box { lx, .. } => term.x_env.coefficient(&kappa, lx),
                    Normalization::Continuous => term.x_env.transform(&kappa),
                };
                if xc == Complex64::default() {
                    continue;
                }
                let weight = 0.5 * term.amplitude * Complex64::from_polar(1.0, sign * term.phase) * xc;
                halves.push(ModeHalf {
                    weight,
                    time: term.time.clone(),
                    v_env: term.v_env.clone(),
                    shift: term.xi_mod.iter().map(|b| sign * b).collect(),
                    norm_v: match norm {
                        Normalization::Box { lv, .. } => Some(lv),
                        Normalization::Continuous => None,
                    },
                });
                time_scale = time_scale.min(term.time.scale());
                freq_scale = freq_scale.min(term.v_env.frequency_scale());
            }
        }
        AnalyticMode {
            halves,
            time_scale,
            freq_scale,
        }
    }
}

impl AnalyticMode {
    pub fn is_zero(&self) -> bool {
        self.halves.is_empty()
    }

    pub fn value(&self, t: f64, eta: &[f64]) -> Complex64 {
        let mut acc = Complex64::default();
        let mut kappa = [0.0; 3];
        for h in &self.halves {
            let tt = h.time.eval(t);
            if tt == 0.0 {
                continue;
            }
            let d = eta.len();
            for j in 0..d {
                kappa[j] = eta[j] - h.shift[j];
            }
            let vc = match h.norm_v {
                Some(lv) => h.v_env.coefficient(&kappa[..d], lv),
                None => h.v_env.transform(&kappa[..d]),
            };
            acc += h.weight * tt * vc;
        }
        acc
    }

    /// Time profiles of the pieces, when each is smooth on the whole line.
    pub(crate) fn smooth_profiles(&self) -> Option<Vec<&TimeProfile>> {
        self.halves
            .iter()
            .map(|h| match h.time {
                TimeProfile::Gaussian { .. } | TimeProfile::Constant => Some(&h.time),
                _ => None,
            })
            .collect()
    }

    /// The `η`-factor of piece `i` (weight included, time profile excluded).
    pub(crate) fn eta_factor(&self, i: usize, eta: &[f64]) -> Complex64 {
        let h = &self.halves[i];
        let mut kappa = [0.0; 3];
        let d = eta.len();
        for j in 0..d {
            kappa[j] = eta[j] - h.shift[j];
        }
        let vc = match h.norm_v {
            Some(lv) => h.v_env.coefficient(&kappa[..d], lv),
            None => h.v_env.transform(&kappa[..d]),
        };
        h.weight * vc
    }

    /// Every piece has zero `η`-factor, so the mode is identically zero in
    /// `t` as long as `η` does not move (that is, at `k = 0`).
    pub(crate) fn vanishes_at(&self, eta: &[f64]) -> bool {
        (0..self.halves.len()).all(|i| self.eta_factor(i, eta) == Complex64::default())
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn frequency_scale(&self) -> f64 {
        self.freq_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_term() -> SourceTerm {
        SourceTerm {
            amplitude: 1.3,
            time: TimeProfile::Gaussian { center: 0.5, width: 0.3 },
            x_env: Envelope::Gaussian { center: vec![0.4], width: 0.9 },
            v_env: Envelope::Gaussian { center: vec![-0.2], width: 0.7 },
            k_mod: vec![0.8],
            xi_mod: vec![-0.6],
            phase: 0.3,
        }
    }

    #[test]
    fn box_coefficients_match_fft() {
        let src = AnalyticSource::new(1, vec![gauss_term()]).unwrap();
        let spec = GridSpec::uniform(1, 0.4, 0.6, 3, 12.0, 64, 10.0, 64).unwrap();
        let f = src.sample(&spec).unwrap();
        let s = crate::spectral::forward(&f);
        let ms = crate::spectral::modes(&spec);
        let norm = Normalization::Box { lx: spec.lx, lv: spec.lv };
        for it in 0..spec.nt {
            let t = spec.time(it);
            for (c, m) in s.slab(it).iter().zip(&ms).filter(|(_, m)| !m.any_nyquist()) {
                let exact = src.at_k(&m.k, norm).value(t, &m.xi);
                // Differences are aliasing of the Gaussian tails, largest near Nyquist.
                assert!((c - exact).norm() < 1e-12, "{m:?}: {c} vs {exact}");
            }
        }
    }

    #[test]
    fn plane_in_v_with_x_dependence_rejected() {
        let mut t = gauss_term();
        t.v_env = Envelope::Plane;
        assert!(AnalyticSource::new(1, vec![t]).is_err());
    }

    #[test]
    fn point_mass_cannot_be_sampled() {
        let mut t = gauss_term();
        t.v_env = Envelope::Point { center: vec![0.0] };
        let src = AnalyticSource::new(1, vec![t]).unwrap();
        let spec = GridSpec::uniform(1, 0.0, 1.0, 2, 1.0, 4, 1.0, 4).unwrap();
        assert!(src.sample(&spec).is_err());
    }
}
