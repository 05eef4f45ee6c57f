//! Fourier coefficients of grid fields on the periodic `(x, v)` axes.
//!
//! Convention: `u(x_j) = Σ_n c_n e^{i k_n x_j}` with `k_n = π n / L` and
//! `x_j = -L + j h`, so `c_n = (-1)^n U_n / N` where `U` is the plain DFT.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::grid::{GridField, GridSpec};

/// Signed index of DFT bin `j` out of `n`.
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub fn is_nyquist(j: usize, n: usize) -> bool {
    n % 2 == 0 && j == n / 2
}

/// Angular wavenumber of bin `j` on a period `2L` sampled with `n` points.
pub fn wavenumber(j: usize, n: usize, half: f64) -> f64 {
    std::f64::consts::PI * signed_index(j, n) as f64 / half
}

/// Frequency pair handed to multiplier closures.
#[derive(Debug, Clone)]
pub struct Mode {
    pub k: Vec<f64>,
    pub xi: Vec<f64>,
    pub k_nyquist: Vec<bool>,
    pub xi_nyquist: Vec<bool>,
}

impl Mode {
    pub fn any_nyquist(&self) -> bool {
        self.k_nyquist.iter().chain(&self.xi_nyquist).any(|&b| b)
    }

    pub fn k_norm(&self) -> f64 {
        self.k.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Complex coefficients on the same layout as the source grid.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub spec: GridSpec,
    pub coeffs: Vec<Complex64>,
}

struct Plans {
    dims: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl Plans {
    fn new(spec: &GridSpec) -> Self {
        let dims: Vec<usize> = spec.nx.iter().chain(&spec.nv).copied().collect();
        let mut planner = FftPlanner::new();
        let fwd = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { dims, fwd, inv }
    }

    /// Transform every lane of the selected spatial axes in one slab.
    fn run(&self, slab: &mut [Complex64], inverse: bool, axes: &[bool]) {
        let total: usize = self.dims.iter().product();
        let mut buf = Vec::new();
        for (a, &n) in self.dims.iter().enumerate() {
            if n == 1 || !axes[a] {
                continue;
            }
            let stride: usize = self.dims[a + 1..].iter().product();
            let outer = total / (n * stride);
            let plan = if inverse { &self.inv[a] } else { &self.fwd[a] };
            buf.resize(n, Complex64::default());
            for o in 0..outer {
                let base = o * n * stride;
                for i in 0..stride {
                    for j in 0..n {
                        buf[j] = slab[base + i + j * stride];
                    }
                    plan.process(&mut buf);
                    for j in 0..n {
                        slab[base + i + j * stride] = buf[j];
                    }
                }
            }
        }
    }
}

/// Fourier coefficients in `x` only, left as functions of `v` on the grid.
/// Same layout as the field.
pub fn forward_x(u: &GridField) -> Vec<Complex64> {
    let spec = &u.spec;
    let d = spec.d;
    let plans = Plans::new(spec);
    let mut axes = vec![false; 2 * d];
    axes[..d].iter_mut().for_each(|a| *a = true);
    let mut xi = vec![0; d];
    let mut vi = vec![0; d];
    let nx: usize = spec.nx_total();
    let signs: Vec<f64> = (0..spec.slab_len())
        .map(|s| {
            spec.split_spatial(s, &mut xi, &mut vi);
            let par: i64 = (0..d).map(|a| signed_index(xi[a], spec.nx[a])).sum();
            if par.rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let n = spec.slab_len();
    let scale = 1.0 / nx as f64;
    let mut out: Vec<Complex64> = u.values.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    out.par_chunks_mut(n.max(1)).for_each(|slab| {
        plans.run(slab, false, &axes);
        for (c, s) in slab.iter_mut().zip(&signs) {
            *c *= s * scale;
        }
    });
    out
}

/// Per-spatial-index sign `(-1)^{Σ n}` accounting for the grid starting at `-L`.
fn phase_signs(spec: &GridSpec) -> Vec<f64> {
    let d = spec.d;
    let mut xi = vec![0; d];
    let mut vi = vec![0; d];
    (0..spec.slab_len())
        .map(|s| {
            spec.split_spatial(s, &mut xi, &mut vi);
            let mut par = 0i64;
            for a in 0..d {
                par += signed_index(xi[a], spec.nx[a]) + signed_index(vi[a], spec.nv[a]);
            }
            if par.rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Frequencies of every spatial index of a slab.
pub fn modes(spec: &GridSpec) -> Vec<Mode> {
    let d = spec.d;
    let mut xi = vec![0; d];
    let mut vi = vec![0; d];
    (0..spec.slab_len())
        .map(|s| {
            spec.split_spatial(s, &mut xi, &mut vi);
            Mode {
                k: (0..d).map(|a| wavenumber(xi[a], spec.nx[a], spec.lx)).collect(),
                xi: (0..d).map(|a| wavenumber(vi[a], spec.nv[a], spec.lv)).collect(),
                k_nyquist: (0..d).map(|a| is_nyquist(xi[a], spec.nx[a])).collect(),
                xi_nyquist: (0..d).map(|a| is_nyquist(vi[a], spec.nv[a])).collect(),
            }
        })
        .collect()
}

pub fn forward(u: &GridField) -> SpectralField {
    let spec = u.spec.clone();
    let plans = Plans::new(&spec);
    let signs = phase_signs(&spec);
    let n = spec.slab_len();
    let scale = 1.0 / n as f64;
    let all = vec![true; 2 * spec.d];
    let mut coeffs: Vec<Complex64> = u.values.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    coeffs.par_chunks_mut(n.max(1)).for_each(|slab| {
        plans.run(slab, false, &all);
        for (c, s) in slab.iter_mut().zip(&signs) {
            *c *= s * scale;
        }
    });
    SpectralField { spec, coeffs }
}

/// Inverse transform; the imaginary part is discarded.
pub fn inverse(s: &SpectralField) -> GridField {
    let spec = s.spec.clone();
    let plans = Plans::new(&spec);
    let signs = phase_signs(&spec);
    let n = spec.slab_len();
    let all = vec![true; 2 * spec.d];
    let mut work = s.coeffs.clone();
    work.par_chunks_mut(n.max(1)).for_each(|slab| {
        for (c, s) in slab.iter_mut().zip(&signs) {
            *c *= *s;
        }
        plans.run(slab, true, &all);
    });
    GridField {
        spec,
        values: work.into_iter().map(|c| c.re).collect(),
    }
}

impl SpectralField {
    pub fn slab(&self, it: usize) -> &[Complex64] {
        let n = self.spec.slab_len();
        &self.coeffs[it * n..(it + 1) * n]
    }

    /// Continuous-norm `L_2` over all time nodes with unit time weight,
    /// i.e. `sqrt(|box| Σ |c|²)`, matching [`grid_l2`].
    pub fn l2(&self) -> f64 {
        let vol = (2.0 * self.spec.lx).powi(self.spec.d as i32) * (2.0 * self.spec.lv).powi(self.spec.d as i32);
        (vol * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Multiply every coefficient by `m(mode)`.
    pub fn apply<F>(&mut self, m: F)
    where
        F: Fn(&Mode) -> Complex64 + Sync,
    {
        let table: Vec<Complex64> = modes(&self.spec).iter().map(&m).collect();
        let n = self.spec.slab_len();
        self.coeffs.par_chunks_mut(n.max(1)).for_each(|slab| {
            for (c, f) in slab.iter_mut().zip(&table) {
                *c *= f;
            }
        });
    }

    /// Evaluate the trigonometric interpolant of time slab `it` at `(x, v)`.
    pub fn eval(&self, it: usize, x: &[f64], v: &[f64]) -> f64 {
        let spec = &self.spec;
        let d = spec.d;
        let ex: Vec<Vec<Complex64>> = (0..d)
            .map(|a| {
                (0..spec.nx[a])
                    .map(|j| nyquist_aware_phase(j, spec.nx[a], spec.lx, x[a]))
                    .collect()
            })
            .collect();
        let ev: Vec<Vec<Complex64>> = (0..d)
            .map(|a| {
                (0..spec.nv[a])
                    .map(|j| nyquist_aware_phase(j, spec.nv[a], spec.lv, v[a]))
                    .collect()
            })
            .collect();
        let mut xi = vec![0; d];
        let mut vi = vec![0; d];
        let mut acc = Complex64::default();
        for (s, c) in self.slab(it).iter().enumerate() {
            spec.split_spatial(s, &mut xi, &mut vi);
            let mut ph = Complex64::new(1.0, 0.0);
            for a in 0..d {
                ph *= ex[a][xi[a]] * ev[a][vi[a]];
            }
            acc += c * ph;
        }
        acc.re
    }
}

/// `e^{i k x}`, with the Nyquist bin replaced by `cos(k x)` so that the
/// interpolant is real and matches the samples.
fn nyquist_aware_phase(j: usize, n: usize, half: f64, x: f64) -> Complex64 {
    let k = wavenumber(j, n, half);
    if is_nyquist(j, n) {
        Complex64::new((k * x).cos(), 0.0)
    } else {
        Complex64::from_polar(1.0, k * x)
    }
}

/// `sqrt(cell Σ u²)` over all nodes (unit time weight).
pub fn grid_l2(u: &GridField) -> f64 {
    (u.spec.cell_xv() * u.values.iter().map(|a| a * a).sum::<f64>()).sqrt()
}

/// Apply a Fourier multiplier to `u`.
pub fn apply_multiplier<F>(u: &GridField, m: F) -> GridField
where
    F: Fn(&Mode) -> Complex64 + Sync,
{
    let mut s = forward(u);
    s.apply(m);
    inverse(&s)
}

/// `∂_{x_axis} u`.
pub fn dx(u: &GridField, axis: usize) -> GridField {
    apply_multiplier(u, |m| {
        if m.k_nyquist[axis] {
            Complex64::default()
        } else {
            Complex64::new(0.0, m.k[axis])
        }
    })
}

/// `∂_{v_axis} u`.
pub fn dv(u: &GridField, axis: usize) -> GridField {
    apply_multiplier(u, |m| {
        if m.xi_nyquist[axis] {
            Complex64::default()
        } else {
            Complex64::new(0.0, m.xi[axis])
        }
    })
}

/// `∂_{v_i} ∂_{v_j} u`.
pub fn dvv(u: &GridField, i: usize, j: usize) -> GridField {
    apply_multiplier(u, |m| {
        if i != j && (m.xi_nyquist[i] || m.xi_nyquist[j]) {
            Complex64::default()
        } else {
            Complex64::new(-m.xi[i] * m.xi[j], 0.0)
        }
    })
}

/// `v · D_x u` on the grid.
pub fn v_dot_dx(u: &GridField) -> Result<GridField> {
    let spec = &u.spec;
    let d = spec.d;
    let mut out = GridField::zeros(spec.clone());
    let slab = spec.slab_len();
    let mut xs = vec![0.0; d];
    let mut vs = vec![0.0; d];
    let vcoord: Vec<Vec<f64>> = (0..slab)
        .map(|s| {
            spec.spatial_coords(s, &mut xs, &mut vs);
            vs.clone()
        })
        .collect();
    for a in 0..d {
        let g = dx(u, a);
        for (idx, (o, gv)) in out.values.iter_mut().zip(&g.values).enumerate() {
            *o += vcoord[idx % slab][a] * gv;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec1(n: usize, m: usize, lx: f64, lv: f64) -> GridSpec {
        GridSpec::uniform(1, 0.0, 1.0, 2, lx, n, lv, m).unwrap()
    }

    #[test]
    fn single_mode_coefficient() {
        let spec = spec1(16, 8, std::f64::consts::PI, std::f64::consts::PI);
        let u = GridField::from_fn(spec, |_, x, _| (3.0 * x[0]).cos());
        let s = forward(&u);
        let ms = modes(&s.spec);
        for (c, m) in s.slab(0).iter().zip(&ms) {
            let expect = if m.xi[0] == 0.0 && (m.k[0].abs() - 3.0).abs() < 1e-12 { 0.5 } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-13, "{m:?} {c}");
        }
    }

    #[test]
    fn derivatives_of_modes() {
        let spec = spec1(16, 16, 2.0, 3.0);
        let kx = std::f64::consts::PI / 2.0;
        let kv = 2.0 * std::f64::consts::PI / 3.0;
        let u = GridField::from_fn(spec.clone(), |_, x, v| (kx * x[0]).sin() * (kv * v[0]).cos());
        let ux = dx(&u, 0);
        let uvv = dvv(&u, 0, 0);
        let e1 = GridField::from_fn(spec.clone(), |_, x, v| kx * (kx * x[0]).cos() * (kv * v[0]).cos());
        let e2 = u.scaled(-kv * kv);
        assert!(ux.sub(&e1).unwrap().max_abs() < 1e-12);
        assert!(uvv.sub(&e2).unwrap().max_abs() < 1e-12);
        let vdx = v_dot_dx(&u).unwrap();
        let e3 = GridField::from_fn(spec, |_, x, v| v[0] * kx * (kx * x[0]).cos() * (kv * v[0]).cos());
        assert!(vdx.sub(&e3).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn interpolant_matches_off_grid() {
        let spec = GridSpec::uniform(2, 0.0, 0.0, 1, 1.0, 8, 2.0, 6).unwrap();
        let f = |x: &[f64], v: &[f64]| {
            (std::f64::consts::PI * x[0]).cos() * (std::f64::consts::PI * v[1] / 2.0).sin() + 0.3 * (std::f64::consts::PI * x[1]).sin()
        };
        let u = GridField::from_fn(spec, |_, x, v| f(x, v));
        let s = forward(&u);
        let (x, v) = ([0.123, -0.77], [0.4, 1.3]);
        assert!((s.eval(0, &x, &v) - f(&x, &v)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn roundtrip_and_parseval(seed in 0u64..500, n in 2usize..9, m in 2usize..9) {
            use rand::Rng;
            let mut rng = crate::rng::seeded(seed);
            let spec = GridSpec::uniform(1, 0.0, 1.0, 2, 1.5, n, 2.5, m).unwrap();
            let vals: Vec<f64> = (0..spec.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = GridField::from_values(spec, vals).unwrap();
            let s = forward(&u);
            let back = inverse(&s);
            let scale = u.max_abs();
            prop_assert!(back.sub(&u).unwrap().max_abs() <= 1e-12 * scale);
            let (a, b) = (grid_l2(&u), s.l2());
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }
}
