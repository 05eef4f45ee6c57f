//! Discrete kinetic maximal and sharp functions over a finite family of
//! past cylinders `Q_{r,cr}(z1)` with `t1 ≤ T`.
//!
//! Averages are plain means over the grid nodes a cylinder contains.
//! Cylinders are not wrapped periodically; nodes outside the grid box do
//! not exist. A cylinder containing no node is skipped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Cylinder, CylinderSide, PhasePoint};
use crate::grid::{GridField, GridSpec};
use crate::norms::{mixed_norm, MixedNormSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderFamily {
    /// Smallest radius; radii are `r_min·2^j`, `j < levels`.
    pub r_min: f64,
    pub levels: usize,
    /// Center lattice spacing as a fraction of the cylinder extent in each
    /// variable (`r²` in time, `(cr)³` in position, `r` in velocity).
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Position radius factor, `R = c·r`.
    pub c: f64,
    /// Cylinder tops satisfy `t1 ≤ t_cut`.
    #[serde(default)]
    pub t_cut: Option<f64>,
}

fn default_spacing() -> f64 {
    0.5
}

impl CylinderFamily {
    pub fn new(r_min: f64, levels: usize, c: f64, t_cut: Option<f64>) -> Result<Self> {
        let fam = Self {
            r_min,
            levels,
            spacing: default_spacing(),
            c,
            t_cut,
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return Err(invalid("r_min", format!("must be positive, got {}", self.r_min)));
        }
        if self.levels == 0 {
            return Err(invalid("levels", "need at least one radius"));
        }
        if !(self.spacing > 0.0 && self.spacing < 1.0) {
            return Err(invalid("spacing", format!("must lie in (0, 1), got {}", self.spacing)));
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(invalid("c", format!("must be at least 1, got {}", self.c)));
        }
        if let Some(t) = self.t_cut {
            if t.is_nan() {
                return Err(invalid("t_cut", "is NaN"));
            }
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.r_min * 2f64.powi(j as i32)).collect()
    }

    /// Admissible tops `t1` at radius `r` for cylinders meeting the grid.
    fn tops(&self, spec: &GridSpec, r: f64) -> Vec<f64> {
        let r2 = r * r;
        let mut upper = spec.t_hi + r2;
        let mut capped = false;
        if let Some(t) = self.t_cut {
            if t < upper {
                upper = t;
                capped = true;
            }
        }
        let step = self.spacing * r2;
        let mut out = Vec::new();
        let mut j = 1usize;
        loop {
            let t1 = spec.t_lo + j as f64 * step;
            if t1 > upper || (capped && t1 >= upper) {
                break;
            }
            out.push(t1);
            j += 1;
        }
        if capped && upper > spec.t_lo {
            out.push(upper);
        }
        out
    }

    /// Lattice points `j·step` strictly inside `(lo, hi)`.
    fn lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let j0 = (lo / step).floor() as i64;
        let j1 = (hi / step).ceil() as i64;
        (j0..=j1).map(|j| j as f64 * step).filter(|&c| c > lo && c < hi).collect()
    }

    /// Number of cylinders [`Self::cylinders`] would produce.
    pub fn count(&self, spec: &GridSpec) -> usize {
        let mut n = 0;
        for r in self.radii() {
            for t1 in self.tops(spec, r) {
                let _ = self.for_each_at(spec, r, t1, |_| n += 1);
            }
        }
        n
    }

    /// Every cylinder of the family that can meet the grid box.
    pub fn cylinders(&self, spec: &GridSpec) -> Result<Vec<Cylinder>> {
        let mut out = Vec::new();
        for r in self.radii() {
            for t1 in self.tops(spec, r) {
                self.for_each_at(spec, r, t1, |q| out.push(q.clone()))?;
            }
        }
        Ok(out)
    }

    /// Visit the cylinders of radius `r` with top `t1`.
    fn for_each_at(&self, spec: &GridSpec, r: f64, t1: f64, mut f: impl FnMut(&Cylinder)) -> Result<()> {
        let d = spec.d;
        let big_r = self.c * r;
        let rad_x = big_r.powi(3);
        let vs: Vec<Vec<f64>> = (0..d)
            .map(|_| Self::lattice(-spec.lv - r, spec.lv + r, self.spacing * r))
            .collect();
        let mut vi = vec![0usize; d];
        if vs.iter().any(|l| l.is_empty()) {
            return Ok(());
        }
        loop {
            let v1: Vec<f64> = (0..d).map(|a| vs[a][vi[a]]).collect();
            let xs: Vec<Vec<f64>> = (0..d)
                .map(|a| {
                    let slide = r * r * v1[a].abs();
                    Self::lattice(-spec.lx - rad_x - slide, spec.lx + rad_x + slide, self.spacing * rad_x)
                })
                .collect();
            if xs.iter().all(|l| !l.is_empty()) {
                let mut xi = vec![0usize; d];
                loop {
                    let x1: Vec<f64> = (0..d).map(|a| xs[a][xi[a]]).collect();
                    let center = PhasePoint::new(t1, x1, v1.clone())?;
                    f(&Cylinder::new(center, r, big_r, CylinderSide::Past)?);
                    if !odometer(&mut xi, |a| xs[a].len()) {
                        break;
                    }
                }
            }
            if !odometer(&mut vi, |a| vs[a].len()) {
                break;
            }
        }
        Ok(())
    }
}

/// Advance a multi-index in row-major order; false after the last one.
fn odometer(idx: &mut [usize], len: impl Fn(usize) -> usize) -> bool {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < len(a) {
            return true;
        }
        idx[a] = 0;
    }
    false
}

/// Inclusive index range `[lo, hi]` of nodes `origin + j·h` that may lie
/// within `rad` of `c`, padded by one node. None if empty.
fn node_range(c: f64, rad: f64, origin: f64, h: f64, n: usize) -> Option<(usize, usize)> {
    let lo = ((c - rad - origin) / h).floor() - 1.0;
    let hi = ((c + rad - origin) / h).ceil() + 1.0;
    if hi < 0.0 || lo > (n - 1) as f64 {
        return None;
    }
    Some((lo.max(0.0) as usize, hi.min((n - 1) as f64) as usize))
}

/// Flat indices of the grid nodes inside `q`, in increasing order.
pub(crate) fn contained_nodes(spec: &GridSpec, q: &Cylinder, out: &mut Vec<usize>) {
    out.clear();
    let d = spec.d;
    let (ta, tb) = q.time_bounds();
    let dt = spec.dt();
    let (it0, it1) = if spec.nt == 1 {
        (0, 0)
    } else {
        match node_range(0.5 * (ta + tb), 0.5 * (tb - ta), spec.t_lo, dt, spec.nt) {
            Some(r) => r,
            None => return,
        }
    };
    let rad_x = q.big_r.powi(3);
    let mut vr = Vec::with_capacity(d);
    for a in 0..d {
        match node_range(q.center.v[a], q.r, -spec.lv, spec.dv(a), spec.nv[a]) {
            Some(r) => vr.push(r),
            None => return,
        }
    }
    let slab = spec.slab_len();
    let mut x = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut xr = Vec::with_capacity(d);
    for it in it0..=it1 {
        let t = spec.time(it);
        if !(ta < t && t < tb) {
            continue;
        }
        let s = t - q.center.t;
        xr.clear();
        for a in 0..d {
            let xc = q.center.x[a] - s * q.center.v[a];
            match node_range(xc, rad_x, -spec.lx, spec.dx(a), spec.nx[a]) {
                Some(r) => xr.push(r),
                None => break,
            }
        }
        if xr.len() < d {
            continue;
        }
        let mut xi: Vec<usize> = xr.iter().map(|r| r.0).collect();
        loop {
            for a in 0..d {
                x[a] = spec.x_coord(a, xi[a]);
            }
            let mut vi: Vec<usize> = vr.iter().map(|r| r.0).collect();
            loop {
                for a in 0..d {
                    v[a] = spec.v_coord(a, vi[a]);
                }
                if q.contains_raw(t, &x, &v) {
                    out.push(it * slab + spec.spatial_index(&xi, &vi));
                }
                if !box_step(&mut vi, &vr) {
                    break;
                }
            }
            if !box_step(&mut xi, &xr) {
                break;
            }
        }
    }
}

fn box_step(idx: &mut [usize], ranges: &[(usize, usize)]) -> bool {
    for a in (0..idx.len()).rev() {
        if idx[a] < ranges[a].1 {
            idx[a] += 1;
            return true;
        }
        idx[a] = ranges[a].0;
    }
    false
}

#[derive(Clone, Copy)]
enum Kind {
    Maximal,
    Sharp,
}

fn sweep(f: &GridField, fam: &CylinderFamily, kind: Kind) -> Result<GridField> {
    fam.validate()?;
    let spec = &f.spec;
    let n = spec.len();
    let jobs: Vec<(f64, f64)> = fam
        .radii()
        .into_iter()
        .flat_map(|r| fam.tops(spec, r).into_iter().map(move |t1| (r, t1)))
        .collect();
    let vals = &f.values;
    let best = jobs
        .par_iter()
        .try_fold(
            || (vec![0.0f64; n], Vec::new()),
            |(mut best, mut nodes), &(r, t1)| {
                fam.for_each_at(spec, r, t1, |q| {
                    contained_nodes(spec, q, &mut nodes);
                    if nodes.is_empty() {
                        return;
                    }
                    let m = nodes.len() as f64;
                    let val = match kind {
                        Kind::Maximal => nodes.iter().map(|&i| vals[i].abs()).sum::<f64>() / m,
                        Kind::Sharp => {
                            let mean = nodes.iter().map(|&i| vals[i]).sum::<f64>() / m;
                            nodes.iter().map(|&i| (vals[i] - mean).abs()).sum::<f64>() / m
                        }
                    };
                    for &i in nodes.iter() {
                        if val > best[i] {
                            best[i] = val;
                        }
                    }
                })?;
                Ok::<_, crate::KfpError>((best, nodes))
            },
        )
        .map(|r| r.map(|(b, _)| b))
        .try_reduce(
            || vec![0.0f64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    if y > *x {
                        *x = y;
                    }
                }
                Ok(a)
            },
        )?;
    GridField::from_values(spec.clone(), best)
}

/// `𝕄f(z) = max over family cylinders Q ∋ z of the mean of |f| on Q`.
/// Nodes in no family cylinder get 0.
pub fn maximal(f: &GridField, fam: &CylinderFamily) -> Result<GridField> {
    sweep(f, fam, Kind::Maximal)
}

/// `f#(z) = max over family cylinders Q ∋ z of the mean of |f - (f)_Q|`.
pub fn sharp(f: &GridField, fam: &CylinderFamily) -> Result<GridField> {
    sweep(f, fam, Kind::Sharp)
}

/// One line of an empirical norm-ratio report.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub corpus_id: String,
    pub p: f64,
    pub r: Vec<f64>,
    pub q: f64,
    pub c: f64,
    /// Worst ratio over the corpus.
    pub ratio: f64,
    pub corpus_size: usize,
}

impl RatioRow {
    pub const HEADER: [&'static str; 7] = ["corpus_id", "p", "r", "q", "c", "ratio", "corpus_size"];

    /// Fields in header order; `r` is `;`-separated.
    pub fn record(&self) -> Vec<String> {
        let r: Vec<String> = self.r.iter().map(|x| x.to_string()).collect();
        vec![
            self.corpus_id.clone(),
            self.p.to_string(),
            r.join(";"),
            self.q.to_string(),
            self.c.to_string(),
            self.ratio.to_string(),
            self.corpus_size.to_string(),
        ]
    }
}

/// Per-field ratios plus the summary row.
#[derive(Debug, Clone)]
pub struct RatioCheck {
    pub row: RatioRow,
    pub ratios: Vec<f64>,
}

fn ratio_check(
    corpus: &[GridField],
    corpus_id: &str,
    norm: &MixedNormSpec,
    fam: &CylinderFamily,
    ratio: impl Fn(&GridField) -> Result<Option<f64>>,
) -> Result<RatioCheck> {
    if corpus.is_empty() {
        return Err(invalid("corpus", "is empty"));
    }
    let ratios = corpus
        .iter()
        .map(&ratio)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<f64>>();
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(RatioCheck {
        row: RatioRow {
            corpus_id: corpus_id.to_string(),
            p: norm.p,
            r: norm.r.clone(),
            q: norm.q,
            c: fam.c,
            ratio: worst,
            corpus_size: corpus.len(),
        },
        ratios,
    })
}

/// `max ‖𝕄f‖ / ‖f‖` over a corpus; zero fields are skipped.
pub fn hl_check(corpus: &[GridField], corpus_id: &str, norm: &MixedNormSpec, fam: &CylinderFamily) -> Result<RatioCheck> {
    ratio_check(corpus, corpus_id, norm, fam, |f| {
        let den = mixed_norm(f, norm)?;
        if den == 0.0 {
            return Ok(None);
        }
        Ok(Some(mixed_norm(&maximal(f, fam)?, norm)? / den))
    })
}

/// `max ‖f‖ / ‖f#‖` over a corpus; fields with vanishing sharp function
/// are skipped.
pub fn fs_check(corpus: &[GridField], corpus_id: &str, norm: &MixedNormSpec, fam: &CylinderFamily) -> Result<RatioCheck> {
    ratio_check(corpus, corpus_id, norm, fam, |f| {
        let den = mixed_norm(&sharp(f, fam)?, norm)?;
        if den == 0.0 {
            return Ok(None);
        }
        Ok(Some(mixed_norm(f, norm)? / den))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::uniform(1, 0.0, 1.0, 8, 2.0, 8, 2.0, 8).unwrap()
    }

    fn fam() -> CylinderFamily {
        CylinderFamily::new(0.4, 3, 1.0, None).unwrap()
    }

    #[test]
    fn constant_has_unit_maximal_and_zero_sharp() {
        let f = GridField::from_fn(grid(), |_, _, _| 1.0);
        let m = maximal(&f, &fam()).unwrap();
        let s = sharp(&f, &fam()).unwrap();
        assert!(m.values.iter().all(|v| *v == 1.0));
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sharp_at_most_twice_maximal() {
        let f = crate::corpus::band_limited(&grid(), 2, 7, 0);
        let m = maximal(&f, &fam()).unwrap();
        let s = sharp(&f, &fam()).unwrap();
        for (a, b) in s.values.iter().zip(&m.values) {
            assert!(*a <= 2.0 * b + 1e-12);
        }
    }

    #[test]
    fn time_cut_limits_support() {
        let f = GridField::from_fn(grid(), |_, _, _| 1.0);
        let fam = CylinderFamily::new(0.4, 2, 1.0, Some(0.5)).unwrap();
        let m = maximal(&f, &fam).unwrap();
        for it in 0..8 {
            let t = grid().time(it);
            let any = m.slab(it).iter().any(|v| *v > 0.0);
            assert_eq!(any, t < 0.5, "t = {t}");
        }
    }

    #[test]
    fn family_rejects_bad_parameters() {
        assert!(CylinderFamily::new(0.0, 1, 1.0, None).is_err());
        assert!(CylinderFamily::new(0.1, 0, 1.0, None).is_err());
        assert!(CylinderFamily::new(0.1, 1, 0.5, None).is_err());
    }
}
