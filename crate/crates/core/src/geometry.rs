//! Kinetic phase-space geometry: the anisotropic quasi-distance, slanted
//! cylinders, time slices and the scaling map `z -> (r^2 t + t0, r^3 x + x0 - r^2 t v0, r v + v0)`.
//!
//! Scaling is `t ~ r^2`, `x ~ r^3`, `v ~ r`, and every cylinder is slanted
//! along the velocity of its center so that it follows the free transport
//! `x(t) = x0 - (t - t0) v0`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KfpError, Result};

/// A point `z = (t, x, v)` of the kinetic phase space `R^{1+2d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhasePoint {
    pub fn new(t: f64, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() {
            return Err(KfpError::DimensionMismatch {
                expected: x.len(),
                found: v.len(),
            });
        }
        if x.is_empty() {
            return Err(invalid("d", "phase points need d >= 1"));
        }
        if !t.is_finite() || x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(invalid("z", "all components must be finite"));
        }
        Ok(Self { t, x, v })
    }

    pub fn origin(d: usize) -> Self {
        Self {
            t: 0.0,
            x: vec![0.0; d],
            v: vec![0.0; d],
        }
    }

    /// Convenience constructor for `d = 1`.
    pub fn new1(t: f64, x: f64, v: f64) -> Self {
        Self {
            t,
            x: vec![x],
            v: vec![v],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

fn check_dims(a: &PhasePoint, b: &PhasePoint) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(KfpError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Sign in the slanted position term `x - x0 ± (t - t0) v0`.
///
/// `Plus` is the convention of the cylinders, the scaling map and the
/// transport operator `d_t - v . D_x`; `Minus` is the variant that appears in
/// the Hölder modulus used for the Landau-type coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlantSign {
    #[default]
    Plus,
    Minus,
}

impl SlantSign {
    #[inline]
    fn factor(self) -> f64 {
        match self {
            SlantSign::Plus => 1.0,
            SlantSign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricParams {
    /// Anisotropy parameter, `c >= 1` for the quasi-metric properties.
    pub c: f64,
    #[serde(default)]
    pub sign: SlantSign,
}

impl QuasiMetricParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("c", format!("must be positive, got {c}")));
        }
        Ok(Self {
            c,
            sign: SlantSign::Plus,
        })
    }

    pub fn with_sign(mut self, sign: SlantSign) -> Self {
        self.sign = sign;
        self
    }
}

#[inline]
fn norm_sq(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|a| a * a).sum()
}

/// `|x - x0 + s (t - t0) v0|` without allocating.
#[inline]
pub(crate) fn slanted_offset(
    dt: f64,
    x: &[f64],
    x0: &[f64],
    v0: &[f64],
    sign: f64,
) -> f64 {
    norm_sq(
        x.iter()
            .zip(x0)
            .zip(v0)
            .map(|((&xi, &x0i), &v0i)| xi - x0i + sign * dt * v0i),
    )
    .sqrt()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm_sq(a.iter().zip(b).map(|(p, q)| p - q)).sqrt()
}

/// Slice version of [`quasi_distance`] for hot loops; no dimension checks.
#[inline]
pub fn quasi_distance_raw(
    t: f64,
    x: &[f64],
    v: &[f64],
    t0: f64,
    x0: &[f64],
    v0: &[f64],
    params: QuasiMetricParams,
) -> f64 {
    let dt = t - t0;
    let time = dt.abs().sqrt();
    let pos = slanted_offset(dt, x, x0, v0, params.sign.factor()).cbrt() / params.c;
    let vel = dist(v, v0);
    time.max(pos).max(vel)
}

/// `rho_c(z, z0) = max{|t - t0|^{1/2}, c^{-1}|x - x0 + (t - t0) v0|^{1/3}, |v - v0|}`.
pub fn quasi_distance(z: &PhasePoint, z0: &PhasePoint, params: QuasiMetricParams) -> Result<f64> {
    check_dims(z, z0)?;
    Ok(quasi_distance_raw(
        z.t, &z.x, &z.v, z0.t, &z0.x, &z0.v, params,
    ))
}

/// `rho_c(z, z0) + rho_c(z0, z)`, the symmetrized quasi-distance.
pub fn symmetrized_distance(
    z: &PhasePoint,
    z0: &PhasePoint,
    params: QuasiMetricParams,
) -> Result<f64> {
    check_dims(z, z0)?;
    Ok(symmetrized_distance_raw(
        z.t, &z.x, &z.v, z0.t, &z0.x, &z0.v, params,
    ))
}

#[inline]
pub fn symmetrized_distance_raw(
    t: f64,
    x: &[f64],
    v: &[f64],
    t0: f64,
    x0: &[f64],
    v0: &[f64],
    params: QuasiMetricParams,
) -> f64 {
    quasi_distance_raw(t, x, v, t0, x0, v0, params)
        + quasi_distance_raw(t0, x0, v0, t, x, v, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderSide {
    /// `Q_{r,R}`: `-r^2 < t - t0 < 0`.
    Past,
    /// `Q~_{r,R}`: `|t - t0| < r^2`.
    TwoSided,
}

/// Kinetic cylinder `Q_{r,R}(z0)` or `Q~_{r,R}(z0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: PhasePoint,
    /// Time/velocity radius.
    pub r: f64,
    /// Position radius; the position ball has radius `R^3`.
    pub big_r: f64,
    pub side: CylinderSide,
}

impl Cylinder {
    pub fn new(center: PhasePoint, r: f64, big_r: f64, side: CylinderSide) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid("r", format!("must be positive, got {r}")));
        }
        if !(big_r > 0.0 && big_r.is_finite()) {
            return Err(invalid("R", format!("must be positive, got {big_r}")));
        }
        Ok(Self {
            center,
            r,
            big_r,
            side,
        })
    }

    /// `Q_r(z0) = Q_{r,r}(z0)`.
    pub fn past(center: PhasePoint, r: f64) -> Result<Self> {
        Self::new(center, r, r, CylinderSide::Past)
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Membership on raw slices. Strict inequalities throughout.
    #[inline]
    pub fn contains_raw(&self, t: f64, x: &[f64], v: &[f64]) -> bool {
        let c = &self.center;
        let dt = t - c.t;
        let time_ok = match self.side {
            CylinderSide::Past => -self.r * self.r < dt && dt < 0.0,
            CylinderSide::TwoSided => dt.abs() < self.r * self.r,
        };
        time_ok
            && dist(v, &c.v) < self.r
            && slanted_offset(dt, x, &c.x, &c.v, 1.0) < self.big_r.powi(3)
    }

    pub fn contains(&self, z: &PhasePoint) -> Result<bool> {
        check_dims(z, &self.center)?;
        Ok(self.contains_raw(z.t, &z.x, &z.v))
    }

    /// Lebesgue measure in closed form.
    pub fn volume(&self) -> f64 {
        let d = self.dim() as i32;
        let omega = unit_ball_volume(self.dim());
        let time = match self.side {
            CylinderSide::Past => self.r * self.r,
            CylinderSide::TwoSided => 2.0 * self.r * self.r,
        };
        time * omega * self.r.powi(d) * omega * self.big_r.powi(3 * d)
    }

    /// Open time interval covered by the cylinder.
    pub(crate) fn time_bounds(&self) -> (f64, f64) {
        let r2 = self.r * self.r;
        match self.side {
            CylinderSide::Past => (self.center.t - r2, self.center.t),
            CylinderSide::TwoSided => (self.center.t - r2, self.center.t + r2),
        }
    }
}

/// `|Q|` for a cylinder; see [`Cylinder::volume`].
pub fn cylinder_volume(q: &Cylinder) -> f64 {
    q.volume()
}

pub fn cylinder_contains(q: &Cylinder, z: &PhasePoint) -> Result<bool> {
    q.contains(z)
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => {
            let h = d as f64 / 2.0;
            std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h + 1.0)
        }
    }
}

/// The time slice `D_r(z0, t) = {(x, v): |x - x0 + (t - t0) v0| < r^3, |v - v0| < r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticSlice {
    pub center: PhasePoint,
    pub t: f64,
    pub r: f64,
}

impl KineticSlice {
    /// Position center `x0 - (t - t0) v0` of the slice.
    pub fn x_center(&self) -> Vec<f64> {
        let dt = self.t - self.center.t;
        self.center
            .x
            .iter()
            .zip(&self.center.v)
            .map(|(x0, v0)| x0 - dt * v0)
            .collect()
    }

    #[inline]
    pub fn contains_raw(&self, x: &[f64], v: &[f64]) -> bool {
        let c = &self.center;
        let dt = self.t - c.t;
        slanted_offset(dt, x, &c.x, &c.v, 1.0) < self.r.powi(3) && dist(v, &c.v) < self.r
    }

    pub fn contains(&self, x: &[f64], v: &[f64]) -> Result<bool> {
        let d = self.center.dim();
        if x.len() != d || v.len() != d {
            return Err(KfpError::DimensionMismatch {
                expected: d,
                found: x.len().max(v.len()),
            });
        }
        Ok(self.contains_raw(x, v))
    }
}

pub fn slice_d(z0: &PhasePoint, t: f64, r: f64) -> Result<KineticSlice> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be positive, got {r}")));
    }
    Ok(KineticSlice {
        center: z0.clone(),
        t,
        r,
    })
}

/// `z~ = (r^2 t + t0, r^3 x + x0 - r^2 t v0, r v + v0)`.
pub fn scaling_map(z: &PhasePoint, z0: &PhasePoint, r: f64) -> Result<PhasePoint> {
    check_dims(z, z0)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be positive, got {r}")));
    }
    let r2 = r * r;
    let r3 = r2 * r;
    Ok(PhasePoint {
        t: r2 * z.t + z0.t,
        x: z
            .x
            .iter()
            .zip(&z0.x)
            .zip(&z0.v)
            .map(|((x, x0), v0)| r3 * x + x0 - r2 * z.t * v0)
            .collect(),
        v: z.v.iter().zip(&z0.v).map(|(v, v0)| r * v + v0).collect(),
    })
}

/// Inverse of [`scaling_map`] for the same `(z0, r)`.
pub fn inverse_scaling_map(zt: &PhasePoint, z0: &PhasePoint, r: f64) -> Result<PhasePoint> {
    check_dims(zt, z0)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be positive, got {r}")));
    }
    let r2 = r * r;
    let r3 = r2 * r;
    let dt = zt.t - z0.t;
    Ok(PhasePoint {
        t: dt / r2,
        x: zt
            .x
            .iter()
            .zip(&z0.x)
            .zip(&z0.v)
            .map(|((x, x0), v0)| (x - x0 + dt * v0) / r3)
            .collect(),
        v: zt.v.iter().zip(&z0.v).map(|(v, v0)| (v - v0) / r).collect(),
    })
}

/// Uniform random point with all components in `[-half, half]`.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, d: usize, half: f64) -> PhasePoint {
    PhasePoint {
        t: rng.random_range(-half..=half),
        x: (0..d).map(|_| rng.random_range(-half..=half)).collect(),
        v: (0..d).map(|_| rng.random_range(-half..=half)).collect(),
    }
}

/// Uniform sample from the box `{|t - t0| < r^2, |v - v0|_inf < r,
/// |x - x0 + (t - t0) v0|_inf < R^3}` which contains `Q~_{r,R}(z0)`.
/// Returns the point and the box volume.
pub fn sample_two_sided_box<R: Rng + ?Sized>(
    rng: &mut R,
    z0: &PhasePoint,
    r: f64,
    big_r: f64,
    out: &mut PhasePoint,
) -> f64 {
    let d = z0.dim();
    let r2 = r * r;
    let r3 = big_r.powi(3);
    let dt = rng.random_range(-r2..r2);
    out.t = z0.t + dt;
    for i in 0..d {
        out.v[i] = z0.v[i] + rng.random_range(-r..r);
        out.x[i] = z0.x[i] - dt * z0.v[i] + rng.random_range(-r3..r3);
    }
    2.0 * r2 * (2.0 * r).powi(d as i32) * (2.0 * r3).powi(d as i32)
}

/// Monte Carlo estimate of `|{rho^_c(., z0) < r} ∩ {t < T}|` with its
/// standard error.
pub fn hat_ball_volume_mc<R: Rng + ?Sized>(
    rng: &mut R,
    z0: &PhasePoint,
    r: f64,
    params: QuasiMetricParams,
    t_cut: f64,
    samples: usize,
) -> (f64, f64) {
    let mut z = z0.clone();
    let mut hits = 0usize;
    let mut vol = 0.0;
    for _ in 0..samples {
        vol = sample_two_sided_box(rng, z0, r, params.c * r, &mut z);
        if z.t < t_cut
            && symmetrized_distance_raw(z.t, &z.x, &z.v, z0.t, &z0.x, &z0.v, params) < r
        {
            hits += 1;
        }
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    (vol * p, vol * (p * (1.0 - p) / n).sqrt())
}

/// Monte Carlo estimate of a cylinder volume by hit counting in its
/// bounding box; `(estimate, standard error)`.
pub fn cylinder_volume_mc<R: Rng + ?Sized>(
    rng: &mut R,
    q: &Cylinder,
    samples: usize,
) -> (f64, f64) {
    let mut z = q.center.clone();
    let mut hits = 0usize;
    let mut vol = 0.0;
    for _ in 0..samples {
        vol = sample_two_sided_box(rng, &q.center, q.r, q.big_r, &mut z);
        if q.contains_raw(z.t, &z.x, &z.v) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    (vol * p, vol * (p * (1.0 - p) / n).sqrt())
}

/// Counts from the quasi-metric property run on random triples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TripleReport {
    pub triples: usize,
    /// `ρ(z, z0) > 2 ρ(z0, z)`.
    pub symmetry_violations: usize,
    /// `ρ(z, z0) > 2 (ρ(z, z1) + ρ(z1, z0))`.
    pub triangle_violations: usize,
    /// Largest observed `ρ(z, z0) / ρ(z0, z)`.
    pub worst_symmetry: f64,
    /// Largest observed `ρ(z, z0) / (ρ(z, z1) + ρ(z1, z0))`.
    pub worst_triangle: f64,
}

impl TripleReport {
    fn merge(mut self, o: Self) -> Self {
        self.triples += o.triples;
        self.symmetry_violations += o.symmetry_violations;
        self.triangle_violations += o.triangle_violations;
        self.worst_symmetry = self.worst_symmetry.max(o.worst_symmetry);
        self.worst_triangle = self.worst_triangle.max(o.worst_triangle);
        self
    }
}

const CHUNK: usize = 4096;

fn chunked<T: Send>(n: usize, seed: u64, f: impl Fn(&mut crate::rng::KfpRng, usize) -> T + Sync) -> Vec<T> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = crate::rng::stream(seed, k as u64);
            f(&mut rng, CHUNK.min(n - k * CHUNK))
        })
        .collect()
}

/// Check both quasi-metric inequalities on `n` random triples with
/// components in `[-10, 10]` and `c` uniform in `[1, 10]`.
pub fn quasi_metric_run(n: usize, d: usize, seed: u64) -> TripleReport {
    chunked(n, seed, |rng, m| {
        let mut rep = TripleReport::default();
        for _ in 0..m {
            let params = QuasiMetricParams {
                c: rng.random_range(1.0..=10.0),
                sign: SlantSign::Plus,
            };
            let z = random_point(rng, d, 10.0);
            let z0 = random_point(rng, d, 10.0);
            let z1 = random_point(rng, d, 10.0);
            let rho = |a: &PhasePoint, b: &PhasePoint| quasi_distance_raw(a.t, &a.x, &a.v, b.t, &b.x, &b.v, params);
            let (a, b) = (rho(&z, &z0), rho(&z0, &z));
            let via = rho(&z, &z1) + rho(&z1, &z0);
            rep.triples += 1;
            if a > 2.0 * b {
                rep.symmetry_violations += 1;
            }
            if a > 2.0 * via {
                rep.triangle_violations += 1;
            }
            if b > 0.0 {
                rep.worst_symmetry = rep.worst_symmetry.max(a / b);
            }
            if via > 0.0 {
                rep.worst_triangle = rep.worst_triangle.max(a / via);
            }
        }
        rep
    })
    .into_iter()
    .fold(TripleReport::default(), TripleReport::merge)
}

/// Membership counts for `{ρ^ < r} ⊂ Q~_{r,cr} ⊂ {ρ^ < 3r}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SandwichReport {
    pub samples: usize,
    /// Points of the small ball found outside the cylinder.
    pub inner_violations: usize,
    /// Points of the cylinder found outside the large ball.
    pub outer_violations: usize,
    /// Samples that landed in the small ball (the inner test is vacuous
    /// without them).
    pub inner_hits: usize,
}

/// Rejection samples from the box around `Q~_{3r,3cr}(z0)` for random
/// `(r, c, z0)`, one configuration per sample.
pub fn ball_sandwich_run(samples: usize, d: usize, seed: u64) -> SandwichReport {
    chunked(samples, seed, |rng, m| {
        let mut rep = SandwichReport::default();
        let mut z = PhasePoint::origin(d);
        for _ in 0..m {
            let r = rng.random_range(0.1..=2.0);
            let params = QuasiMetricParams {
                c: rng.random_range(1.0..=10.0),
                sign: SlantSign::Plus,
            };
            let z0 = random_point(rng, d, 10.0);
            let q = Cylinder {
                center: z0.clone(),
                r,
                big_r: params.c * r,
                side: CylinderSide::TwoSided,
            };
            // draws from boxes of three sizes so both inclusions are exercised
            let scale = [0.5, 1.0, 3.0][rng.random_range(0..3)];
            sample_two_sided_box(rng, &z0, scale * r, scale * params.c * r, &mut z);
            let hat = symmetrized_distance_raw(z.t, &z.x, &z.v, z0.t, &z0.x, &z0.v, params);
            let inside = q.contains_raw(z.t, &z.x, &z.v);
            rep.samples += 1;
            if hat < r {
                rep.inner_hits += 1;
                if !inside {
                    rep.inner_violations += 1;
                }
            }
            if inside && !(hat < 3.0 * r) {
                rep.outer_violations += 1;
            }
        }
        rep
    })
    .into_iter()
    .fold(SandwichReport::default(), |a, b| SandwichReport {
        samples: a.samples + b.samples,
        inner_violations: a.inner_violations + b.inner_violations,
        outer_violations: a.outer_violations + b.outer_violations,
        inner_hits: a.inner_hits + b.inner_hits,
    })
}

/// Doubling ratios `|B_{2r} ∩ {t < T}| / |B_r ∩ {t < T}|` of `ρ^_c` balls.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Doubling ratio for `configs` random `(r, c, z0, T)` with `t0 ≤ T`,
/// `samples` Monte Carlo draws per ball.
pub fn doubling_run(configs: usize, samples: usize, d: usize, seed: u64) -> DoublingReport {
    let ratios: Vec<f64> = (0..configs)
        .into_par_iter()
        .map(|k| {
            let mut rng = crate::rng::stream(seed, k as u64);
            let r = rng.random_range(0.1..=2.0);
            let params = QuasiMetricParams {
                c: rng.random_range(1.0..=10.0),
                sign: SlantSign::Plus,
            };
            let z0 = random_point(&mut rng, d, 10.0);
            let t_cut = z0.t + rng.random_range(0.0..=2.0 * r * r);
            let (small, _) = hat_ball_volume_mc(&mut rng, &z0, r, params, t_cut, samples);
            let (big, _) = hat_ball_volume_mc(&mut rng, &z0, 2.0 * r, params, t_cut, samples);
            big / small
        })
        .collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    DoublingReport { ratios, max_ratio }
}
