//! Sampled fields on a tensor grid `[T_lo, T_hi] x [-L_x, L_x)^d x [-L_v, L_v)^d`,
//! periodic in `x` and `v`, with equispaced time nodes (no wrap in `t`).
//!
//! Values are stored row-major over `(t, x_1..x_d, v_1..v_d)`.
//!
//! Binary dump layout (little endian):
//!
//! ```text
//! 16 bytes   magic "KFP-GRIDFIELD\0v1"
//! u64        N_t
//! u64 x d    N_x per axis
//! u64 x d    N_v per axis
//! u64        d
//! f64 x 4    T_lo, T_hi, L_x, L_v
//! f64 x ..   values, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, KfpError, Result};

pub const DUMP_MAGIC: &[u8; 16] = b"KFP-GRIDFIELD\0v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub nt: usize,
    pub lx: f64,
    pub nx: Vec<usize>,
    pub lv: f64,
    pub nv: Vec<usize>,
}

impl GridSpec {
    /// Same resolution on every axis.
    pub fn uniform(d: usize, t_lo: f64, t_hi: f64, nt: usize, lx: f64, nx: usize, lv: f64, nv: usize) -> Result<Self> {
        let s = Self {
            d,
            t_lo,
            t_hi,
            nt,
            lx,
            nx: vec![nx; d],
            lv,
            nv: vec![nv; d],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 3 {
            return Err(invalid("d", format!("expected 1..=3, got {}", self.d)));
        }
        if self.nx.len() != self.d || self.nv.len() != self.d {
            return Err(KfpError::DimensionMismatch {
                expected: self.d,
                found: self.nx.len().max(self.nv.len()),
            });
        }
        if self.nt == 0 || self.nx.iter().chain(&self.nv).any(|&n| n == 0) {
            return Err(KfpError::Grid("all extents must be positive".into()));
        }
        if !(self.lx > 0.0 && self.lv > 0.0 && self.lx.is_finite() && self.lv.is_finite()) {
            return Err(KfpError::Grid("half-widths must be positive".into()));
        }
        if !(self.t_lo.is_finite() && self.t_hi.is_finite()) || self.t_hi < self.t_lo {
            return Err(KfpError::Grid("invalid time window".into()));
        }
        if self.nt > 1 && self.t_hi <= self.t_lo {
            return Err(KfpError::Grid("time window must have positive length".into()));
        }
        Ok(())
    }

    pub fn nx_total(&self) -> usize {
        self.nx.iter().product()
    }

    pub fn nv_total(&self) -> usize {
        self.nv.iter().product()
    }

    /// Number of spatial nodes per time slab.
    pub fn slab_len(&self) -> usize {
        self.nx_total() * self.nv_total()
    }

    pub fn len(&self) -> usize {
        self.nt * self.slab_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shape `[N_t, N_x.., N_v..]`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(1 + 2 * self.d);
        s.push(self.nt);
        s.extend(&self.nx);
        s.extend(&self.nv);
        s
    }

    pub fn dt(&self) -> f64 {
        if self.nt > 1 {
            (self.t_hi - self.t_lo) / (self.nt - 1) as f64
        } else {
            0.0
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_lo + i as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|i| self.time(i)).collect()
    }

    pub fn dx(&self, axis: usize) -> f64 {
        2.0 * self.lx / self.nx[axis] as f64
    }

    pub fn dv(&self, axis: usize) -> f64 {
        2.0 * self.lv / self.nv[axis] as f64
    }

    pub fn x_coord(&self, axis: usize, j: usize) -> f64 {
        -self.lx + j as f64 * self.dx(axis)
    }

    pub fn v_coord(&self, axis: usize, j: usize) -> f64 {
        -self.lv + j as f64 * self.dv(axis)
    }

    pub fn x_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.nx[axis]).map(|j| self.x_coord(axis, j)).collect()
    }

    pub fn v_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.nv[axis]).map(|j| self.v_coord(axis, j)).collect()
    }

    /// Volume element of one `(x, v)` cell.
    pub fn cell_xv(&self) -> f64 {
        (0..self.d).map(|a| self.dx(a) * self.dv(a)).product()
    }

    /// Decompose a flat spatial index into per-axis x and v indices.
    pub fn split_spatial(&self, mut idx: usize, xi: &mut [usize], vi: &mut [usize]) {
        for a in (0..self.d).rev() {
            vi[a] = idx % self.nv[a];
            idx /= self.nv[a];
        }
        for a in (0..self.d).rev() {
            xi[a] = idx % self.nx[a];
            idx /= self.nx[a];
        }
    }

    /// Flat spatial index from x and v multi-indices.
    pub fn spatial_index(&self, xi: &[usize], vi: &[usize]) -> usize {
        let mut idx = 0;
        for a in 0..self.d {
            idx = idx * self.nx[a] + xi[a];
        }
        for a in 0..self.d {
            idx = idx * self.nv[a] + vi[a];
        }
        idx
    }

    /// Spatial coordinates `(x, v)` of a flat spatial index.
    pub fn spatial_coords(&self, idx: usize, x: &mut [f64], v: &mut [f64]) {
        let mut xi = vec![0; self.d];
        let mut vi = vec![0; self.d];
        self.split_spatial(idx, &mut xi, &mut vi);
        for a in 0..self.d {
            x[a] = self.x_coord(a, xi[a]);
            v[a] = self.v_coord(a, vi[a]);
        }
    }

    pub fn same_layout(&self, other: &GridSpec) -> bool {
        self == other
    }
}

/// Samples of a real scalar field on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.len();
        Self {
            spec,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(KfpError::Grid(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    /// Sample `f(t, x, v)` at every node.
    pub fn from_fn<F: Fn(f64, &[f64], &[f64]) -> f64>(spec: GridSpec, f: F) -> Self {
        let d = spec.d;
        let slab = spec.slab_len();
        let mut values = vec![0.0; spec.len()];
        let mut x = vec![0.0; d];
        let mut v = vec![0.0; d];
        for it in 0..spec.nt {
            let t = spec.time(it);
            for s in 0..slab {
                spec.spatial_coords(s, &mut x, &mut v);
                values[it * slab + s] = f(t, &x, &v);
            }
        }
        Self { spec, values }
    }

    pub fn slab(&self, it: usize) -> &[f64] {
        let n = self.spec.slab_len();
        &self.values[it * n..(it + 1) * n]
    }

    pub fn slab_mut(&mut self, it: usize) -> &mut [f64] {
        let n = self.spec.slab_len();
        &mut self.values[it * n..(it + 1) * n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|a| c * a)
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if !self.spec.same_layout(&other.spec) {
            return Err(KfpError::Grid("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &GridField) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &GridField) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Plain discrete `l_2` norm of the value array (no cell volumes).
    pub fn l2(&self) -> f64 {
        self.values.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let s = &self.spec;
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(s.nt as u64).to_le_bytes())?;
        for &n in s.nx.iter().chain(&s.nv) {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        w.write_all(&(s.d as u64).to_le_bytes())?;
        for b in [s.t_lo, s.t_hi, s.lx, s.lv] {
            w.write_all(&b.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_dump(std::io::BufWriter::new(f))
    }

    /// Parse a dump. `d` is stored after the extents, so the reader tries each
    /// supported `d` and keeps the one whose marker and payload size agree.
    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 16 || &bytes[..16] != DUMP_MAGIC {
            return Err(KfpError::Format("bad magic".into()));
        }
        let u64_at = |off: usize| -> Option<u64> {
            bytes
                .get(off..off + 8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        };
        for d in 1..=3usize {
            let marker = 16 + 8 * (1 + 2 * d);
            if u64_at(marker) != Some(d as u64) {
                continue;
            }
            let ext: Vec<usize> = (0..1 + 2 * d)
                .map(|i| u64_at(16 + 8 * i).unwrap() as usize)
                .collect();
            let header = marker + 8 + 32;
            let count: usize = ext.iter().product();
            if bytes.len() != header + 8 * count {
                continue;
            }
            let f = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let spec = GridSpec {
                d,
                nt: ext[0],
                nx: ext[1..1 + d].to_vec(),
                nv: ext[1 + d..].to_vec(),
                t_lo: f(marker + 8),
                t_hi: f(marker + 16),
                lx: f(marker + 24),
                lv: f(marker + 32),
            };
            spec.validate()?;
            let values = (0..count).map(|i| f(header + 8 * i)).collect();
            return Ok(Self { spec, values });
        }
        Err(KfpError::Format("inconsistent header or payload size".into()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_dump(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_roundtrip() {
        let spec = GridSpec {
            d: 2,
            t_lo: 0.0,
            t_hi: 1.0,
            nt: 2,
            lx: 1.0,
            nx: vec![3, 4],
            lv: 2.0,
            nv: vec![5, 2],
        };
        spec.validate().unwrap();
        let mut xi = [0; 2];
        let mut vi = [0; 2];
        for s in 0..spec.slab_len() {
            spec.split_spatial(s, &mut xi, &mut vi);
            assert_eq!(spec.spatial_index(&xi, &vi), s);
        }
        assert_eq!(spec.shape(), vec![2, 3, 4, 5, 2]);
    }

    #[test]
    fn rejects_bad_dumps() {
        assert!(GridField::read_dump(&b"not a dump"[..]).is_err());
        let spec = GridSpec::uniform(1, 0.0, 1.0, 2, 1.0, 4, 1.0, 4).unwrap();
        let f = GridField::zeros(spec);
        let mut buf = Vec::new();
        f.write_dump(&mut buf).unwrap();
        buf.pop();
        assert!(GridField::read_dump(&buf[..]).is_err());
    }

    proptest! {
        #[test]
        fn dump_roundtrip(d in 1usize..=2, nt in 1usize..4, n in 1usize..5, m in 1usize..5, seed in 0u64..1000) {
            let spec = GridSpec::uniform(d, -0.5, 1.5, nt, 2.0, n, 3.0, m).unwrap();
            let f = GridField::from_fn(spec, |t, x, v| {
                (seed as f64 + t) * x.iter().sum::<f64>() - v.iter().product::<f64>()
            });
            let mut buf = Vec::new();
            f.write_dump(&mut buf).unwrap();
            prop_assert_eq!(&buf[..16], DUMP_MAGIC);
            let g = GridField::read_dump(&buf[..]).unwrap();
            prop_assert_eq!(f, g);
        }
    }
}
