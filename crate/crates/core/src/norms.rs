//! Weighted mixed-norm Lebesgue norms and the kinetic Sobolev norm on grid
//! fields.
//!
//! Quadrature is fixed: rectangle rule on the periodic `x` and `v` axes,
//! trapezoid rule in `t`. Weights are taken at the nodes, except that a node
//! sitting on a power singularity gets the closed-form cell average.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KfpError, Result};
use crate::fd::time_derivative;
use crate::grid::{GridField, GridSpec};
use crate::quadrature::GaussLegendre;
use crate::spectral;
use crate::weights::{ProductWeight, Weight1D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormVariant {
    /// `L_p` in `x`, then weighted `L_{r_i}` in `v_i`, then weighted `L_q` in `t`.
    TimeOuter,
    /// `L_p` in `(t, x)` jointly with weight `|x|^α`, then weighted `L_{r_i}` in `v_i`.
    XWeighted { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedNormSpec {
    pub p: f64,
    pub r: Vec<f64>,
    pub q: f64,
    pub weight: ProductWeight,
    /// Upper time cut; `None` for no cut.
    #[serde(default)]
    pub t_cut: Option<f64>,
    pub variant: NormVariant,
}

impl MixedNormSpec {
    /// Unweighted, unmixed `L_p`.
    pub fn lp(d: usize, p: f64) -> Self {
        Self {
            p,
            r: vec![p; d],
            q: p,
            weight: ProductWeight::unit(d),
            t_cut: None,
            variant: NormVariant::TimeOuter,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.r.len() != d || self.weight.wi.len() != d {
            return Err(KfpError::DimensionMismatch {
                expected: d,
                found: self.r.len(),
            });
        }
        if !(self.p > 1.0 && self.q > 1.0 && self.r.iter().all(|&r| r > 1.0)) {
            return Err(invalid("p", "all exponents must be > 1"));
        }
        if let NormVariant::XWeighted { alpha } = self.variant {
            if !(alpha > -1.0 && alpha < self.p - 1.0) {
                return Err(invalid("alpha", format!("must lie in (-1, {})", self.p - 1.0)));
            }
        }
        self.weight.validate()
    }
}

/// Trapezoid weights in `t` over the nodes with `t ≤ T`, times `w_0`.
fn time_weights(spec: &GridSpec, t_cut: Option<f64>, w0: Option<&Weight1D>) -> Vec<f64> {
    let nt = spec.nt;
    let dt = spec.dt();
    let eps = 1e-12 * (spec.t_hi - spec.t_lo).abs().max(1.0);
    let last = match t_cut {
        None => nt,
        Some(tc) => (0..nt).take_while(|&i| spec.time(i) <= tc + eps).count(),
    };
    let mut w = vec![0.0; nt];
    if last < 2 {
        return w;
    }
    for (i, wi) in w.iter_mut().enumerate().take(last) {
        let end = i == 0 || i == last - 1;
        let t = spec.time(i);
        let (a, b) = (
            if i == 0 { t } else { t - 0.5 * dt },
            if i == last - 1 { t } else { t + 0.5 * dt },
        );
        let wt = w0.map_or(1.0, |w0| w0.node_value(t, a, b));
        *wi = if end { 0.5 * dt } else { dt } * wt;
    }
    w
}

/// Average of `|x|^α` over the cell `∏[-h_i/2, h_i/2]`.
fn origin_cell_average(alpha: f64, h: &[f64]) -> Result<f64> {
    match h.len() {
        1 => Ok((0.5 * h[0]).powf(alpha) / (alpha + 1.0)),
        2 => {
            // polar coordinates on the quadrant [0, a] × [0, b]
            let (a, b) = (0.5 * h[0], 0.5 * h[1]);
            let th0 = (b / a).atan();
            let gl = GaussLegendre::new(32);
            let e = alpha + 2.0;
            let i1 = gl.integrate(0.0, th0, |t| (a / t.cos()).powf(e));
            let i2 = gl.integrate(th0, std::f64::consts::FRAC_PI_2, |t| (b / t.sin()).powf(e));
            Ok((i1 + i2) / e / (a * b))
        }
        _ => Err(KfpError::Unsupported("cell average of |x|^α is implemented for d <= 2".into())),
    }
}

/// `|x|^α` at every x-node of the grid, flattened in x order.
fn x_weights(spec: &GridSpec, alpha: f64) -> Result<Vec<f64>> {
    let d = spec.d;
    let nxt = spec.nx_total();
    let h: Vec<f64> = (0..d).map(|a| spec.dx(a)).collect();
    let origin = origin_cell_average(alpha, &h);
    let mut out = Vec::with_capacity(nxt);
    for flat in 0..nxt {
        let mut r = flat;
        let mut n2 = 0.0;
        for a in (0..d).rev() {
            let j = r % spec.nx[a];
            r /= spec.nx[a];
            n2 += spec.x_coord(a, j).powi(2);
        }
        out.push(if n2 == 0.0 && alpha != 0.0 {
            origin.clone()?
        } else {
            n2.sqrt().powf(alpha)
        });
    }
    Ok(out)
}

/// Weights `dv_i · w_i(v_i)` per velocity axis.
fn v_weights(spec: &GridSpec, weight: &ProductWeight) -> Vec<Vec<f64>> {
    (0..spec.d)
        .map(|a| {
            let h = spec.dv(a);
            spec.v_coords(a)
                .into_iter()
                .map(|v| h * weight.wi[a].node_value(v, v - 0.5 * h, v + 0.5 * h))
                .collect()
        })
        .collect()
}

/// Reduce `g` (indexed by flat v-index, `v_d` fastest) over `v_1, …, v_d`
/// in order with exponents `r_1, …, r_d`, starting from values already
/// raised to the power `first` (that is, `g = G^{first}`).
fn reduce_v(g: Vec<f64>, first: f64, r: &[f64], vw: &[Vec<f64>], nv: &[usize]) -> f64 {
    let d = nv.len();
    // layout of the remaining axes: v_a .. v_d, with v_a slowest
    let mut cur = g;
    let mut prev_exp = first;
    for a in 0..d {
        let inner: usize = nv[a + 1..].iter().product();
        let mut next = vec![0.0; inner];
        for ia in 0..nv[a] {
            let w = vw[a][ia];
            for (j, nx) in next.iter_mut().enumerate() {
                let val = cur[ia * inner + j].max(0.0).powf(r[a] / prev_exp);
                *nx += w * val;
            }
        }
        cur = next;
        prev_exp = r[a];
    }
    // cur[0] = (norm)^{r_d}
    cur[0].max(0.0).powf(1.0 / prev_exp)
}

/// Iterated weighted mixed norm of `f`.
pub fn mixed_norm(f: &GridField, spec: &MixedNormSpec) -> Result<f64> {
    let g = &f.spec;
    spec.validate(g.d)?;
    let nxt = g.nx_total();
    let nvt = g.nv_total();
    let slab = g.slab_len();
    let cellx: f64 = (0..g.d).map(|a| g.dx(a)).product();
    let vw = v_weights(g, &spec.weight);
    let p = spec.p;
    match spec.variant {
        NormVariant::TimeOuter => {
            let tw = time_weights(g, spec.t_cut, Some(&spec.weight.w0));
            let per_t: Vec<f64> = (0..g.nt)
                .into_par_iter()
                .map(|it| {
                    if tw[it] == 0.0 {
                        return 0.0;
                    }
                    let s = &f.values[it * slab..(it + 1) * slab];
                    let mut inner = vec![0.0; nvt];
                    for ix in 0..nxt {
                        for (iv, acc) in inner.iter_mut().enumerate() {
                            *acc += s[ix * nvt + iv].abs().powf(p);
                        }
                    }
                    inner.iter_mut().for_each(|a| *a *= cellx);
                    reduce_v(inner, p, &spec.r, &vw, &g.nv)
                })
                .collect();
            let total: f64 = per_t.iter().zip(&tw).map(|(n, w)| w * n.powf(spec.q)).sum();
            Ok(total.powf(1.0 / spec.q))
        }
        NormVariant::XWeighted { alpha } => {
            let tw = time_weights(g, spec.t_cut, None);
            let xw = x_weights(g, alpha)?;
            let parts: Vec<Vec<f64>> = (0..g.nt)
                .into_par_iter()
                .map(|it| {
                    let mut inner = vec![0.0; nvt];
                    if tw[it] == 0.0 {
                        return inner;
                    }
                    let s = &f.values[it * slab..(it + 1) * slab];
                    for (ix, wx) in xw.iter().enumerate() {
                        for (iv, acc) in inner.iter_mut().enumerate() {
                            *acc += wx * s[ix * nvt + iv].abs().powf(p);
                        }
                    }
                    inner.iter_mut().for_each(|a| *a *= cellx * tw[it]);
                    inner
                })
                .collect();
            let mut inner = vec![0.0; nvt];
            for part in parts {
                for (a, b) in inner.iter_mut().zip(part) {
                    *a += b;
                }
            }
            Ok(reduce_v(inner, p, &spec.r, &vw, &g.nv))
        }
    }
}

/// Pointwise Euclidean magnitude of a vector of fields.
pub fn magnitude(parts: &[GridField]) -> Result<GridField> {
    let first = parts.first().ok_or_else(|| invalid("parts", "need at least one component"))?;
    let mut out = GridField::zeros(first.spec.clone());
    for p in parts {
        first.check_same_grid(p)?;
        for (o, v) in out.values.iter_mut().zip(&p.values) {
            *o += v * v;
        }
    }
    out.values.iter_mut().for_each(|v| *v = v.sqrt());
    Ok(out)
}

/// `|D_v u|`.
pub fn grad_v_magnitude(u: &GridField) -> Result<GridField> {
    let parts: Vec<GridField> = (0..u.spec.d).map(|a| spectral::dv(u, a)).collect();
    magnitude(&parts)
}

/// `|D²_v u|` (Frobenius).
pub fn hess_v_magnitude(u: &GridField) -> Result<GridField> {
    let d = u.spec.d;
    let mut parts = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            parts.push(spectral::dvv(u, i, j));
        }
    }
    magnitude(&parts)
}

/// `Y u = ∂_t u - v·D_x u`, central differences in `t` (one-sided at the
/// ends) and spectral `D_x`.
pub fn transport_derivative(u: &GridField) -> Result<GridField> {
    transport_derivative_with(u, 3)
}

/// As [`transport_derivative`] with a `width`-point stencil in `t`.
pub fn transport_derivative_with(u: &GridField, width: usize) -> Result<GridField> {
    if u.spec.nt < 3 {
        return Err(KfpError::Grid("transport derivative needs at least 3 time nodes".into()));
    }
    let mut out = time_derivative(u, width.min(u.spec.nt))?;
    let vdx = spectral::v_dot_dx(u)?;
    for (o, w) in out.values.iter_mut().zip(&vdx.values) {
        *o -= w;
    }
    Ok(out)
}

/// The four terms of the kinetic Sobolev norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SNorm {
    pub u: f64,
    pub dv: f64,
    pub d2v: f64,
    pub transport: f64,
}

impl SNorm {
    pub fn total(&self) -> f64 {
        self.u + self.dv + self.d2v + self.transport
    }
}

/// `‖u‖ + ‖D_v u‖ + ‖D²_v u‖ + ‖Y u‖` in the mixed norm of `spec`.
pub fn s_norm(u: &GridField, spec: &MixedNormSpec) -> Result<SNorm> {
    s_norm_with(u, spec, 3)
}

pub fn s_norm_with(u: &GridField, spec: &MixedNormSpec, width: usize) -> Result<SNorm> {
    Ok(SNorm {
        u: mixed_norm(u, spec)?,
        dv: mixed_norm(&grad_v_magnitude(u)?, spec)?,
        d2v: mixed_norm(&hess_v_magnitude(u)?, spec)?,
        transport: mixed_norm(&transport_derivative_with(u, width)?, spec)?,
    })
}
