//! Seeded random fields and sources used by the empirical checks.

use std::f64::consts::PI;

use rand::Rng;

use crate::grid::{GridField, GridSpec};
use crate::rng::stream;
use crate::solver::{AnalyticSource, Envelope, SourceTerm, TimeProfile};

/// Real trigonometric polynomial in `(x, v)` with random coefficients on
/// frequencies up to `max_mode` per axis, modulated by a random smooth
/// time profile.
pub fn band_limited(spec: &GridSpec, max_mode: usize, seed: u64, index: u64) -> GridField {
    let mut rng = stream(seed, index);
    let d = spec.d;
    let terms: Vec<(Vec<f64>, Vec<f64>, f64, f64, f64)> = (0..4 + max_mode)
        .map(|_| {
            let k: Vec<f64> = (0..d)
                .map(|_| rng.random_range(0..=max_mode) as f64 * PI / spec.lx)
                .collect();
            let xi: Vec<f64> = (0..d)
                .map(|_| rng.random_range(0..=max_mode) as f64 * PI / spec.lv)
                .collect();
            let amp = rng.random_range(-1.0..1.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            let omega = rng.random_range(0.0..3.0);
            (k, xi, amp, phase, omega)
        })
        .collect();
    GridField::from_fn(spec.clone(), |t, x, v| {
        terms
            .iter()
            .map(|(k, xi, a, ph, om)| {
                let arg: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>()
                    + xi.iter().zip(v).map(|(k, v)| k * v).sum::<f64>();
                a * (arg + ph).cos() * (1.0 + 0.5 * (om * t).sin())
            })
            .sum()
    })
}

/// `exp(1 - 1/(1 - s²))` on `|s| < 1`.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Sum of smooth compactly supported bumps placed in the interior of the
/// grid box (support at least a quarter box away from every edge in
/// `x` and `v`, and inside the time window).
pub fn interior_bumps(spec: &GridSpec, count: usize, seed: u64, index: u64) -> GridField {
    let mut rng = stream(seed, index);
    let d = spec.d;
    let (t0, t1) = (spec.t_lo, spec.t_hi);
    let bumps: Vec<(f64, f64, f64, Vec<f64>, Vec<f64>, f64, f64)> = (0..count)
        .map(|_| {
            let wt = rng.random_range(0.1..0.25) * (t1 - t0);
            let tc = rng.random_range(t0 + wt..t1 - wt);
            let wx = rng.random_range(0.15..0.3) * spec.lx;
            let wv = rng.random_range(0.15..0.3) * spec.lv;
            let xc: Vec<f64> = (0..d).map(|_| rng.random_range(-0.4..0.4) * spec.lx).collect();
            let vc: Vec<f64> = (0..d).map(|_| rng.random_range(-0.4..0.4) * spec.lv).collect();
            let amp = rng.random_range(0.2..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (amp, tc, wt, xc, vc, wx, wv)
        })
        .collect();
    GridField::from_fn(spec.clone(), |t, x, v| {
        bumps
            .iter()
            .map(|(a, tc, wt, xc, vc, wx, wv)| {
                let mut val = a * bump((t - tc) / wt);
                for i in 0..d {
                    val *= bump((x[i] - xc[i]) / wx) * bump((v[i] - vc[i]) / wv);
                }
                val
            })
            .sum()
    })
}

/// Parameters of the random Gaussian source corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCorpus {
    pub d: usize,
    /// Largest modulation frequency in `x` and `v`.
    pub max_modulation: f64,
    pub x_width: (f64, f64),
    pub v_width: (f64, f64),
    /// Time profile: Gaussian with center and width ranges.
    pub t_center: (f64, f64),
    pub t_width: (f64, f64),
    /// Range of the envelope centers in `x` and `v`.
    pub spread: f64,
}

impl SourceCorpus {
    /// Sources resolved by a 64×64 grid on `[-12,12) × [-10,10)` over `[0, 1]`.
    pub fn standard() -> Self {
        Self {
            d: 1,
            max_modulation: 1.0,
            x_width: (0.9, 1.2),
            v_width: (0.6, 0.8),
            t_center: (0.4, 0.6),
            t_width: (0.25, 0.35),
            spread: 1.0,
        }
    }

    /// One or two Gaussian-modulated terms; the `x`-modulation lies on the
    /// lattice `πn/lx` so the source is compatible with the grid.
    pub fn sample(&self, lx: f64, seed: u64, index: u64) -> AnalyticSource {
        let mut rng = stream(seed, index);
        let d = self.d;
        let nterms = rng.random_range(1..=2);
        let terms = (0..nterms)
            .map(|_| {
                let kmax = (self.max_modulation * lx / PI).floor() as i64;
                let k_mod: Vec<f64> = (0..d)
                    .map(|_| rng.random_range(0..=kmax) as f64 * PI / lx)
                    .collect();
                let xi_mod: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..self.max_modulation)).collect();
                SourceTerm {
                    amplitude: rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                    time: TimeProfile::Gaussian {
                        center: rng.random_range(self.t_center.0..self.t_center.1),
                        width: rng.random_range(self.t_width.0..self.t_width.1),
                    },
                    x_env: Envelope::Gaussian {
                        center: (0..d).map(|_| rng.random_range(-self.spread..self.spread)).collect(),
                        width: rng.random_range(self.x_width.0..self.x_width.1),
                    },
                    v_env: Envelope::Gaussian {
                        center: (0..d).map(|_| rng.random_range(-self.spread..self.spread)).collect(),
                        width: rng.random_range(self.v_width.0..self.v_width.1),
                    },
                    k_mod,
                    xi_mod,
                    phase: rng.random_range(0.0..2.0 * PI),
                }
            })
            .collect();
        AnalyticSource { d, terms }
    }
}
