//! The full operator `P u + b·D_v u + (c + λ) u` on grid fields and the
//! scaling identities of the kinetic dilation.

use num_complex::Complex64;

use crate::coefficients::{CoefficientField, LowerOrderTerms};
use crate::error::{invalid, KfpError, Result};
use crate::fd::time_derivative;
use crate::geometry::PhasePoint;
use crate::grid::{GridField, GridSpec};
use crate::spectral::{self, grid_l2, SpectralField};

/// Default stencil width for `∂_t`; eighth order in the interior.
pub const DEFAULT_TIME_STENCIL: usize = 9;

pub fn apply_operator(a: &CoefficientField, lot: &LowerOrderTerms, u: &GridField) -> Result<GridField> {
    apply_operator_with(a, lot, u, DEFAULT_TIME_STENCIL)
}

/// `∂_t u - v·D_x u - a^{ij} D_{v_i v_j} u + b^i D_{v_i} u + (c + λ) u` with
/// spectral derivatives in `(x, v)` and a `width`-point stencil in `t`.
pub fn apply_operator_with(a: &CoefficientField, lot: &LowerOrderTerms, u: &GridField, width: usize) -> Result<GridField> {
    let spec = &u.spec;
    let d = spec.d;
    if a.d != d {
        return Err(KfpError::DimensionMismatch { expected: d, found: a.d });
    }
    if spec.nt < 3 {
        return Err(KfpError::Grid("operator needs at least 3 time nodes".into()));
    }
    let mut out = time_derivative(u, width)?;
    let vdx = spectral::v_dot_dx(u)?;
    for (o, w) in out.values.iter_mut().zip(&vdx.values) {
        *o -= w;
    }

    let slab = spec.slab_len();
    let coords = node_coords(spec);
    let time_only = a.is_xv_independent();
    for i in 0..d {
        for j in 0..d {
            let dij = spectral::dvv(u, i, j);
            for it in 0..spec.nt {
                let t = spec.time(it);
                let a_t = if time_only { Some(a.eval(t, &coords[0].0, &coords[0].1)[(i, j)]) } else { None };
                for s in 0..slab {
                    let aij = a_t.unwrap_or_else(|| a.eval(t, &coords[s].0, &coords[s].1)[(i, j)]);
                    out.values[it * slab + s] -= aij * dij.values[it * slab + s];
                }
            }
        }
    }
    if !lot.b.is_zero() {
        for i in 0..d {
            let dvi = spectral::dv(u, i);
            for it in 0..spec.nt {
                let t = spec.time(it);
                for s in 0..slab {
                    let b = lot.b.eval(d, t, &coords[s].0, &coords[s].1);
                    out.values[it * slab + s] += b[i] * dvi.values[it * slab + s];
                }
            }
        }
    }
    for it in 0..spec.nt {
        let t = spec.time(it);
        for s in 0..slab {
            let c = lot.c.eval(t, &coords[s].0, &coords[s].1) + lot.lambda;
            out.values[it * slab + s] += c * u.values[it * slab + s];
        }
    }
    Ok(out)
}

fn node_coords(spec: &GridSpec) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = spec.d;
    let mut x = vec![0.0; d];
    let mut v = vec![0.0; d];
    (0..spec.slab_len())
        .map(|s| {
            spec.spatial_coords(s, &mut x, &mut v);
            (x.clone(), v.clone())
        })
        .collect()
}

/// `‖r - f‖ / ‖f‖` in the discrete `L_2` norm.
pub fn relative_residual(r: &GridField, f: &GridField) -> Result<f64> {
    let diff = r.sub(f)?;
    let nf = grid_l2(f);
    if nf == 0.0 {
        return Ok(grid_l2(&diff));
    }
    Ok(grid_l2(&diff) / nf)
}

/// Maximal relative deviations in `Y ũ = r² (Y u)∘T` and `P̃ ũ = r² (P u)∘T`,
/// where `T` is the kinetic dilation about `z_0` and `P̃` has coefficients `a∘T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingReport {
    /// Max `|lhs - rhs|` over max `|rhs|`.
    pub transport_deviation: f64,
    pub operator_deviation: f64,
    /// Max `|lhs - rhs|`.
    pub transport_abs: f64,
    pub operator_abs: f64,
    pub nodes_checked: usize,
}

/// Sample `g` at the dilated nodes: slab `i` of the result holds
/// `g(t_i, x_j + x_0 - r² t'_i v_0, v_l + v_0)`, which is `g∘T` on the
/// rescaled grid.
fn pull_back(g: &GridField, z0: &PhasePoint, r: f64, t_tilde: &[f64]) -> GridField {
    let spec = &g.spec;
    let d = spec.d;
    let mut s = spectral::forward(g);
    let modes = spectral::modes(spec);
    let slab = spec.slab_len();
    for (it, &tt) in t_tilde.iter().enumerate() {
        let sx: Vec<f64> = (0..d).map(|a| z0.x[a] - r * r * tt * z0.v[a]).collect();
        for (c, m) in s.coeffs[it * slab..(it + 1) * slab].iter_mut().zip(&modes) {
            if m.any_nyquist() {
                *c = Complex64::default();
                continue;
            }
            let ph: f64 = (0..d).map(|a| m.k[a] * sx[a] + m.xi[a] * z0.v[a]).sum();
            *c *= Complex64::from_polar(1.0, ph);
        }
    }
    spectral::inverse(&SpectralField {
        spec: spec.clone(),
        coeffs: s.coeffs,
    })
}

/// Check both dilation identities on the grid of `ũ(z) = u(T z)`, with
/// `T z = (r² t + t_0, r³ x + x_0 - r² t v_0, r v + v_0)`.
///
/// The rescaled grid uses the preimage time nodes; `t_range` optionally
/// restricts them and must map back inside the window of `u`.
pub fn scaling_conjugation_check(
    u: &GridField,
    a: &CoefficientField,
    z0: &PhasePoint,
    r: f64,
    t_range: Option<(f64, f64)>,
) -> Result<ScalingReport> {
    let spec = &u.spec;
    let d = spec.d;
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    if z0.dim() != d || a.d != d {
        return Err(KfpError::DimensionMismatch { expected: d, found: z0.dim() });
    }
    let r2 = r * r;
    let t_tilde: Vec<f64> = spec.times().iter().map(|t| (t - z0.t) / r2).collect();
    let (first, last) = match t_range {
        None => (0, spec.nt - 1),
        Some((lo, hi)) => {
            let img = (r2 * lo + z0.t, r2 * hi + z0.t);
            let eps = 1e-12 * (spec.t_hi - spec.t_lo).abs().max(1.0);
            if img.0 < spec.t_lo - eps || img.1 > spec.t_hi + eps {
                return Err(KfpError::Grid(format!(
                    "dilated times [{}, {}] leave the window [{}, {}]",
                    img.0, img.1, spec.t_lo, spec.t_hi
                )));
            }
            let f = t_tilde.iter().position(|&t| t >= lo - eps).unwrap_or(spec.nt);
            let l = t_tilde.iter().rposition(|&t| t <= hi + eps).unwrap_or(0);
            (f, l)
        }
    };
    if last < first + 2 {
        return Err(KfpError::Grid("need at least 3 time nodes in the checked range".into()));
    }

    let tilde_spec = GridSpec {
        d,
        t_lo: t_tilde[0],
        t_hi: t_tilde[spec.nt - 1],
        nt: spec.nt,
        lx: spec.lx / r.powi(3),
        nx: spec.nx.clone(),
        lv: spec.lv / r,
        nv: spec.nv.clone(),
    };
    let retag = |g: GridField| GridField {
        spec: tilde_spec.clone(),
        values: g.values,
    };
    let ut = retag(pull_back(u, z0, r, &t_tilde));

    let width = DEFAULT_TIME_STENCIL.min(spec.nt);
    let ut_t = time_derivative(&ut, width)?;
    let ut_vdx = spectral::v_dot_dx(&ut)?;
    let u_t = retag(pull_back(&time_derivative(u, width)?, z0, r, &t_tilde));
    let u_dx: Vec<GridField> = (0..d).map(|ax| retag(pull_back(&spectral::dx(u, ax), z0, r, &t_tilde))).collect();

    let slab = spec.slab_len();
    let coords = node_coords(&tilde_spec);
    let mut y_lhs = vec![0.0; spec.len()];
    let mut y_rhs = vec![0.0; spec.len()];
    for it in 0..spec.nt {
        for s in 0..slab {
            let n = it * slab + s;
            y_lhs[n] = ut_t.values[n] - ut_vdx.values[n];
            let vimg: Vec<f64> = (0..d).map(|ax| r * coords[s].1[ax] + z0.v[ax]).collect();
            let mut rhs = u_t.values[n];
            for ax in 0..d {
                rhs -= vimg[ax] * u_dx[ax].values[n];
            }
            y_rhs[n] = r2 * rhs;
        }
    }

    let mut p_lhs = y_lhs.clone();
    let mut p_rhs = y_rhs.clone();
    for i in 0..d {
        for j in 0..d {
            let lhs_vv = spectral::dvv(&ut, i, j);
            let rhs_vv = retag(pull_back(&spectral::dvv(u, i, j), z0, r, &t_tilde));
            for it in 0..spec.nt {
                let tt = tilde_spec.time(it);
                for s in 0..slab {
                    let n = it * slab + s;
                    let (x, v) = &coords[s];
                    let zt = crate::geometry::scaling_map(
                        &PhasePoint { t: tt, x: x.clone(), v: v.clone() },
                        z0,
                        r,
                    )?;
                    let aij = a.eval(zt.t, &zt.x, &zt.v)[(i, j)];
                    p_lhs[n] -= aij * lhs_vv.values[n];
                    p_rhs[n] -= r2 * aij * rhs_vv.values[n];
                }
            }
        }
    }

    let range = first * slab..(last + 1) * slab;
    let dev = |l: &[f64], r: &[f64]| {
        let scale = r[range.clone()].iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let diff = l[range.clone()]
            .iter()
            .zip(&r[range.clone()])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        (if scale > 0.0 { diff / scale } else { diff }, diff)
    };
    let (ty, ty_abs) = dev(&y_lhs, &y_rhs);
    let (tp, tp_abs) = dev(&p_lhs, &p_rhs);
    Ok(ScalingReport {
        transport_deviation: ty,
        operator_deviation: tp,
        transport_abs: ty_abs,
        operator_abs: tp_abs,
        nodes_checked: range.len(),
    })
}
